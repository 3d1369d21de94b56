// Minimal host declarations.  The snippets are global scripts injected
// into CommonJS test files, so only these two bindings are assumed.

declare function require(id: string): any;

declare const process: {
  env: Record<string, string | undefined>;
};
