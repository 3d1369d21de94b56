// Sink wrapper: replaces function-valued properties on a sink-root
// object with wrappers that scan their arguments for the taint marker,
// then delegate to the original unchanged.

const __GH_SCAN_DEPTH = 5;

function __ghScanArg(
  value: unknown,
  path: string,
  depth: number,
  seen: Set<object>,
  hit: (path: string, value: string) => void
): void {
  if (typeof value === "string") {
    if (value.indexOf(__GH_MARKER) !== -1) {
      hit(path, value);
    }
    return;
  }
  if (value === null || depth <= 0) {
    return;
  }
  if (typeof value !== "object" && typeof value !== "function") {
    return;
  }
  const obj = value as Record<string, unknown>;
  if (seen.has(obj)) {
    return;
  }
  seen.add(obj);
  let keys: string[];
  try {
    keys = Object.keys(obj);
  } catch {
    return;
  }
  for (const key of keys) {
    let child: unknown;
    try {
      child = obj[key];
    } catch {
      continue;
    }
    __ghScanArg(child, path ? path + "." + key : key, depth - 1, seen, hit);
  }
}

function __ghWrapNative(
  obj: Record<string, unknown>,
  prefix: string
): Record<string, unknown> {
  for (const name of Object.keys(obj)) {
    const desc = Object.getOwnPropertyDescriptor(obj, name);
    if (!desc || typeof desc.value !== "function") {
      continue;
    }
    if (!desc.configurable || !desc.writable) {
      __ghLog("AGENT_ERR", { msg: "cannot wrap sink: " + prefix + "." + name });
      continue;
    }
    const original = desc.value as (...args: unknown[]) => unknown;
    const sink = prefix + "." + name;
    obj[name] = function __ghWrapped(this: unknown, ...args: unknown[]): unknown {
      if (!__ghAgentBusy) {
        __ghAgentBusy = true;
        try {
          const stack = __ghStack();
          for (let i = 0; i < args.length; i++) {
            __ghScanArg(args[i], "", __GH_SCAN_DEPTH, new Set(), (path, value) => {
              __ghLog("SINK_HIT", { sink, arg: i, path, value, stack });
            });
          }
        } finally {
          __ghAgentBusy = false;
        }
      }
      return original.apply(this, args);
    };
  }
  return obj;
}
