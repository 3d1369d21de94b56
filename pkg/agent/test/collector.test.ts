import { describe, expect, test } from "vitest";
import { ofKind, runAgent, FORIN_SENTINEL } from "./util";

describe("stage-1 collector", () => {
  test("reports each undefined property once, by name", () => {
    const run = runAgent(`
      const opts = globalThis.__mkOptions({});
      void opts.shell; void opts.shell; void opts.shell;
      void opts.env;
      console.log("done");
    `, { snippet: "collect" });
    expect(run.exitCode).toBe(0);
    expect(run.stdout).toContain("done");
    const props = ofKind(run, "UNDEF_PROP").map((r) => r.payload.prop);
    expect(props.sort()).toEqual(["env", "shell"]);
  });

  test("own and inherited-but-present properties stay silent", () => {
    const run = runAgent(`
      const opts = globalThis.__mkOptions({ shell: "/bin/sh" });
      void opts.shell;
      void opts.toString;   // exists on Object.prototype
      console.log("quiet");
    `, { snippet: "collect" });
    expect(run.exitCode).toBe(0);
    expect(ofKind(run, "UNDEF_PROP")).toEqual([]);
  });

  test("emits AGENT_ERR when the root prototype is immutable, then degrades gracefully", () => {
    const run = runAgent(`console.log("alive");`, { snippet: "collect" });
    expect(run.exitCode).toBe(0);
    expect(run.stdout).toContain("alive");
    // Node's Object.prototype cannot be re-parented; the fallback is
    // announced on the wire instead of silently changing behavior.
    expect(ofKind(run, "AGENT_ERR").length).toBeGreaterThanOrEqual(1);
  });

  test("optional chaining on booleans routes through the fallback", () => {
    const run = runAgent(`
      const entry = (false)?.main;
      console.log("entry:", entry);
    `, { snippet: "collect" });
    expect(run.exitCode).toBe(0);
    expect(run.stdout).toContain("entry: undefined");
    const props = ofKind(run, "UNDEF_PROP").map((r) => r.payload.prop);
    expect(props).toContain("main");
  });

  test("__mkOptions preserves the caller's own keys", () => {
    const run = runAgent(`
      const opts = globalThis.__mkOptions({ a: 1, b: "two" });
      console.log(JSON.stringify([opts.a, opts.b, Object.keys(opts).sort()]));
    `, { snippet: "collect" });
    expect(run.stdout).toContain('[1,"two",["a","b"]]');
  });

  test("symbol lookups never reach the log", () => {
    const run = runAgent(`
      const opts = globalThis.__mkOptions({});
      void opts[Symbol.iterator];
      void opts[Symbol.toPrimitive];
      console.log("sym ok");
    `, { snippet: "collect" });
    expect(run.exitCode).toBe(0);
    expect(ofKind(run, "UNDEF_PROP")).toEqual([]);
  });

  test("never reports the for-in sentinel", () => {
    const run = runAgent(`
      const opts = globalThis.__mkOptions({});
      void opts[${JSON.stringify(FORIN_SENTINEL)}];
      console.log("ok");
    `, { snippet: "collect" });
    const props = ofKind(run, "UNDEF_PROP").map((r) => r.payload.prop);
    expect(props).not.toContain(FORIN_SENTINEL);
  });
});
