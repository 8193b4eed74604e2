import { describe, expect, test } from "vitest";

import {
  helloFrame,
  markerFrame,
  offGridReportFrame,
  onGrid,
  parseEngineMessage,
  tickFrame,
} from "../src/protocol.js";

describe("onGrid", () => {
  test("accepts every grid rate", () => {
    for (const rate of [0.6, 0.7, 0.8, 0.9, 1.0]) {
      expect(onGrid(rate)).toBe(true);
    }
  });

  test("tolerates float residue from accumulated 0.1 steps", () => {
    expect(onGrid(0.6 + 0.1)).toBe(true);
    expect(onGrid(0.6 + 0.1 + 0.1 + 0.1)).toBe(true);
    expect(onGrid(1.0 - 0.1 - 0.1)).toBe(true);
  });

  test("rejects off-grid, out-of-range, and non-finite rates", () => {
    for (const rate of [0.55, 0.65, 1.1, 0.5, 1.3, 0.0, -0.8, NaN, Infinity]) {
      expect(onGrid(rate)).toBe(false);
    }
  });
});

describe("parseEngineMessage", () => {
  test("parses speed frames", () => {
    const msg = parseEngineMessage('{"type":"speed","rate":0.9,"t":43.1,"cause":"no_laugh"}');
    expect(msg).toEqual({ type: "speed", rate: 0.9, t: 43.1, cause: "no_laugh" });
  });

  test("parses state and error frames", () => {
    expect(parseEngineMessage('{"type":"state","rate":0.8,"punchlines_seen":3}')).toEqual({
      type: "state",
      rate: 0.8,
      punchlinesSeen: 3,
    });
    expect(parseEngineMessage('{"type":"error","code":"bad_field"}')).toEqual({
      type: "error",
      code: "bad_field",
    });
  });

  test("returns null for malformed input", () => {
    for (const raw of [
      "not json",
      "[1,2]",
      "null",
      '"speed"',
      '{"type":"speed","rate":"fast","t":1}',
      '{"type":"speed","rate":0.9}',
      '{"type":"speed","rate":null,"t":1}',
      '{"type":"state"}',
      '{"type":"error"}',
      '{"type":"mystery"}',
      "{}",
    ]) {
      expect(parseEngineMessage(raw)).toBeNull();
    }
  });
});

describe("outbound frames", () => {
  test("shapes match the wire contract", () => {
    expect(JSON.parse(helloFrame())).toEqual({ type: "hello", role: "player" });
    expect(JSON.parse(tickFrame(12.25))).toEqual({ type: "tick", t: 12.25 });
    expect(JSON.parse(markerFrame(3.5))).toEqual({ type: "marker", t: 3.5 });
    expect(JSON.parse(offGridReportFrame(1.3))).toEqual({
      type: "error",
      code: "off_grid_rate",
      rate: 1.3,
    });
  });
});
