// Hunt-mode snippet entry: polluter, sink wrapper hook, and the
// function-from-string interceptor.

__ghInstallPolluter();
__ghWrapFunctionFromString();
(globalThis as Record<string, unknown> & typeof globalThis).__wrapNative = __ghWrapNative;
