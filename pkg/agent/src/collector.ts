// Stage-1 collector: observe property lookups that miss every object on
// a prototype chain, and report each distinct name once per run.

const __ghSeenProps = new Set<string>();
const __ghCollectorSuppressed = __ghSuppressedProps();
let __ghCollectorBusy = false;

// A proxy intended to sit at the tail of a prototype chain.  Its target
// delegates to `protoBelow`, so only lookups missing everything above
// AND below are logged; the property is always reported as absent-as-usual
// (Reflect.get), preserving program semantics.
function __ghMakeTailProxy(protoBelow: object | null): object {
  const target = Object.create(protoBelow);
  return new Proxy(target, {
    get(t: object, prop: string | symbol, receiver: unknown): unknown {
      if (
        typeof prop === "string" &&
        !__ghCollectorBusy &&
        !__ghCollectorSuppressed.has(prop) &&
        !Reflect.has(t, prop)
      ) {
        __ghCollectorBusy = true;
        try {
          if (!__ghSeenProps.has(prop)) {
            __ghSeenProps.add(prop);
            __ghLog("UNDEF_PROP", { prop });
          }
        } finally {
          __ghCollectorBusy = false;
        }
      }
      return Reflect.get(t, prop, receiver);
    },
  });
}

function __ghInstallCollector(): void {
  try {
    // The direct route: observe misses on the root prototype itself.
    Object.setPrototypeOf(Object.prototype, __ghMakeTailProxy(null));
    return;
  } catch (err) {
    // V8 marks Object.prototype as an immutable-prototype exotic object;
    // report the degradation and fall back to the hooks below.
    __ghLog("AGENT_ERR", { msg: "cannot re-parent root prototype: " + String(err) });
  }
  try {
    // Primitive wrapper prototypes are still mutable; this covers misses
    // like `(false)?.main` that never touch a plain object.
    Object.setPrototypeOf(Boolean.prototype, __ghMakeTailProxy(Object.prototype));
  } catch (err) {
    __ghLog("AGENT_ERR", { msg: "cannot re-parent Boolean.prototype: " + String(err) });
  }
  // Option-object hook: programs route option bags through __mkOptions so
  // their chains terminate in the interception proxy.
  (globalThis as Record<string, unknown> & typeof globalThis).__mkOptions =
    function __ghMkOptions(obj: Record<string, unknown>): Record<string, unknown> {
      const out = Object.create(__ghMakeTailProxy(Object.prototype));
      for (const key of Object.keys(obj)) {
        out[key] = obj[key];
      }
      return out;
    };
}
