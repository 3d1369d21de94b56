// Tainted proxy values for object-type pollution: every property access,
// call, iteration step, or primitive coercion propagates the taint mark.

let __ghNextTaintId = 0;

function __ghMintTaint(prop: string, wireType: string): number {
  const id = __ghNextTaintId++;
  __ghAgentBusy = true;
  try {
    __ghLog("SRC_ACCESS", { prop, id, type: wireType, stack: __ghStack() });
  } finally {
    __ghAgentBusy = false;
  }
  return id;
}

function __ghMakeTainted(prop: string, wireType: string, id: number): unknown {
  const str = __GH_MARKER + id;
  // A function target keeps the proxy callable, so method calls on the
  // taint keep propagating instead of throwing.
  const target = function __ghTaintedTarget(): void {};
  return new Proxy(target, {
    get(_t: object, key: string | symbol): unknown {
      if (key === Symbol.toPrimitive) {
        return () => str;
      }
      if (key === "toString" || key === "valueOf") {
        return () => str;
      }
      if (key === Symbol.iterator) {
        return function* __ghTaintedIter(): Generator<unknown> {
          yield __ghTaintChild(prop, wireType);
        };
      }
      if (typeof key === "symbol") {
        return undefined;
      }
      // `then` would turn the taint into a hanging thenable; `toJSON`
      // would send JSON.stringify into unbounded recursion.
      if (key === "then" || key === "toJSON") {
        return undefined;
      }
      return __ghTaintChild(prop, wireType);
    },
    apply(): unknown {
      return __ghTaintChild(prop, wireType);
    },
    construct(): object {
      return __ghTaintChild(prop, wireType) as object;
    },
    has(): boolean {
      return true;
    },
    // Report the function target's real own keys (none enumerable), so
    // enumeration-based consumers (spread, Object.keys, for-in) see an
    // empty bag without tripping proxy invariants on `prototype`.
    ownKeys(t: object): ArrayLike<string | symbol> {
      return Reflect.ownKeys(t);
    },
    getOwnPropertyDescriptor(t: object, key: string | symbol): PropertyDescriptor | undefined {
      return Reflect.getOwnPropertyDescriptor(t, key);
    },
  });
}

function __ghTaintChild(prop: string, wireType: string): unknown {
  return __ghMakeTainted(prop, wireType, __ghMintTaint(prop, wireType));
}
