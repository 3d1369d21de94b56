// Function-from-string interception: the Function constructor and the
// global eval binding.  Direct-eval call sites resolve the intrinsic
// before we can swap it and are a recorded limitation.

function __ghWrapFunctionFromString(): void {
  const OrigFunction = globalThis.Function;
  const wrappedFunction = function __ghFunction(this: unknown, ...args: unknown[]): unknown {
    __ghCheckEvalArgs(args);
    return Reflect.construct(OrigFunction, args);
  };
  wrappedFunction.prototype = OrigFunction.prototype;
  (globalThis as Record<string, unknown> & typeof globalThis).Function =
    wrappedFunction as FunctionConstructor;

  const origEval = globalThis.eval;
  (globalThis as Record<string, unknown> & typeof globalThis).eval =
    function __ghEval(code: unknown): unknown {
      __ghCheckEvalArgs([code]);
      return origEval(code as string);
    };
}

function __ghCheckEvalArgs(args: unknown[]): void {
  if (__ghAgentBusy) {
    return;
  }
  for (const arg of args) {
    if (typeof arg === "string" && arg.indexOf(__GH_MARKER) !== -1) {
      __ghAgentBusy = true;
      try {
        __ghLog("EVAL_HIT", { value: arg, stack: __ghStack() });
      } finally {
        __ghAgentBusy = false;
      }
      break;
    }
  }
}
