// Pollution simulator: an accessor on the root prototype for the single
// property under test.  The getter mints a fresh taint per access; the
// setter shadows the property on the receiver so legitimate writes win.

function __ghInstallPolluter(): void {
  const prop = process.env.GHUNTER_PROP;
  const envType = process.env.GHUNTER_TYPE || "string";
  if (!prop) {
    __ghLog("AGENT_ERR", { msg: "GHUNTER_PROP not set; polluter disabled" });
    return;
  }
  if (Object.prototype.hasOwnProperty.call(Object.prototype, prop)) {
    __ghLog("AGENT_ERR", { msg: "property already defined on root prototype: " + prop });
    return;
  }
  // For-in probes mint plain strings; only the wire type differs.
  const wireType = envType === "forin" ? "forin" : envType;
  const asObject = envType === "object";
  Object.defineProperty(Object.prototype, prop, {
    configurable: true,
    // Visible to enumeration only for the for-in probe's sentinel.
    enumerable: prop === __GH_FORIN_SENTINEL,
    get: function __ghGet(): unknown {
      if (__ghAgentBusy) {
        // Re-entrant lookup from inside the agent (e.g. the logger's own
        // file write): behave as if unpolluted.
        return undefined;
      }
      const id = __ghMintTaint(prop, wireType);
      return asObject ? __ghMakeTainted(prop, wireType, id) : __GH_MARKER + id;
    },
    set: function __ghSet(this: unknown, value: unknown): void {
      Object.defineProperty(this as object, prop, {
        value,
        writable: true,
        enumerable: true,
        configurable: true,
      });
    },
  });
}
