import { describe, expect, test } from "vitest";
import { ofKind, runAgent, FORIN_SENTINEL, MARKER } from "./util";

describe("stage-2 polluter", () => {
  test("string pollution mints a fresh marker value per access", () => {
    const run = runAgent(`
      const a = ({}).shell;
      const b = ({}).shell;
      console.log(JSON.stringify([a, b, a === b]));
    `, { snippet: "hunt", prop: "shell", type: "string" });
    expect(run.exitCode).toBe(0);
    const [a, b, equal] = JSON.parse(run.stdout.trim());
    expect(a).toMatch(/^0xEFFACED\d+$/);
    expect(b).toMatch(/^0xEFFACED\d+$/);
    expect(equal).toBe(false);

    const sources = ofKind(run, "SRC_ACCESS");
    expect(sources).toHaveLength(2);
    const ids = sources.map((r) => r.payload.id);
    expect(new Set(ids).size).toBe(2);
    expect(a).toBe(`0xEFFACED${ids[0]}`);
    expect(b).toBe(`0xEFFACED${ids[1]}`);
    for (const src of sources) {
      expect(src.payload.prop).toBe("shell");
      expect(src.payload.type).toBe("string");
    }
  });

  test("assignment shadows the pollution on the receiver", () => {
    const run = runAgent(`
      const obj = {};
      obj.shell = "/bin/zsh";
      console.log("value:", obj.shell, "own:", Object.prototype.hasOwnProperty.call(obj, "shell"));
    `, { snippet: "hunt", prop: "shell", type: "string" });
    expect(run.exitCode).toBe(0);
    expect(run.stdout).toContain("value: /bin/zsh own: true");
    // The write itself must not count as a source access.
    expect(ofKind(run, "SRC_ACCESS")).toEqual([]);
  });

  test("only the for-in sentinel is enumerable", () => {
    const sentinelRun = runAgent(`
      const seen = [];
      for (const k in { real: 1 }) seen.push(k);
      console.log(JSON.stringify(seen));
    `, { snippet: "hunt", prop: FORIN_SENTINEL, type: "forin" });
    expect(JSON.parse(sentinelRun.stdout.trim())).toEqual(["real", FORIN_SENTINEL]);

    const plainRun = runAgent(`
      const seen = [];
      for (const k in { real: 1 }) seen.push(k);
      console.log(JSON.stringify(seen));
    `, { snippet: "hunt", prop: "shell", type: "string" });
    expect(JSON.parse(plainRun.stdout.trim())).toEqual(["real"]);
  });

  test("sentinel accesses report wire type forin", () => {
    const run = runAgent(`
      void ({})[${JSON.stringify(FORIN_SENTINEL)}];
    `, { snippet: "hunt", prop: FORIN_SENTINEL, type: "forin" });
    const sources = ofKind(run, "SRC_ACCESS");
    expect(sources).toHaveLength(1);
    expect(sources[0].payload.type).toBe("forin");
    expect(sources[0].payload.prop).toBe(FORIN_SENTINEL);
  });

  test("refuses to pollute an existing root-prototype property", () => {
    const run = runAgent(`
      console.log("toString intact:", typeof ({}).toString);
    `, { snippet: "hunt", prop: "toString", type: "string" });
    expect(run.exitCode).toBe(0);
    expect(run.stdout).toContain("toString intact: function");
    const errs = ofKind(run, "AGENT_ERR").map((r) => r.payload.msg);
    expect(errs.some((m: string) => m.includes("already defined"))).toBe(true);
  });

  test("missing GHUNTER_PROP disables the polluter loudly", () => {
    const run = runAgent(
      `console.log("shell:", ({}).shell);`,
      { snippet: "crash" },  // crash snippet = polluter only
    );
    expect(run.exitCode).toBe(0);
    expect(run.stdout).toContain("shell: undefined");
    const errs = ofKind(run, "AGENT_ERR").map((r) => r.payload.msg);
    expect(errs.some((m: string) => m.includes("GHUNTER_PROP"))).toBe(true);
  });

  test("source stacks exclude agent frames", () => {
    const run = runAgent(`
      function readOptions(opts) { return opts.shell; }
      void readOptions({});
    `, { snippet: "hunt", prop: "shell", type: "string" });
    const [src] = ofKind(run, "SRC_ACCESS");
    expect(src.payload.stack.length).toBeGreaterThan(0);
    expect(src.payload.stack[0]).toContain("readOptions");
    for (const frame of src.payload.stack) {
      expect(frame).not.toContain("__gh");
    }
  });

  test("marker values never appear without pollution", () => {
    const run = runAgent(`
      console.log("shell:", ({}).shell);
    `, { snippet: "collect" });
    expect(run.stdout).toContain("shell: undefined");
    expect(run.stdout).not.toContain(MARKER);
  });
});
