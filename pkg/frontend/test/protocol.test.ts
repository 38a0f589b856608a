import { describe, expect, it } from "vitest";

import { FrameDecoder, encodeFrame } from "../src/protocol.js";

describe("frame codec", () => {
  it("round-trips a frame", () => {
    const decoder = new FrameDecoder();
    const frames = decoder.push(encodeFrame("snapshot", { tick: 3, active: [] }));
    expect(frames).toEqual([{ type: "snapshot", payload: { tick: 3, active: [] } }]);
  });

  it("decodes several frames from one chunk", () => {
    const decoder = new FrameDecoder();
    const chunk = Buffer.concat([
      encodeFrame("hello", { version: 1 }),
      encodeFrame("ack", { ok: true, id: 2 }),
    ]);
    const frames = decoder.push(chunk);
    expect(frames.map((f) => f.type)).toEqual(["hello", "ack"]);
  });

  it("handles frames split at arbitrary byte boundaries", () => {
    const encoded = Buffer.concat([
      encodeFrame("snapshot", { tick: 1, text: "aaaa bbbb cccc" }),
      encodeFrame("outcome", { kind: "integrated", id: 9 }),
    ]);
    for (let split = 1; split < encoded.length - 1; split += 3) {
      const decoder = new FrameDecoder();
      const first = decoder.push(encoded.subarray(0, split));
      const second = decoder.push(encoded.subarray(split));
      const all = [...first, ...second];
      expect(all.map((f) => f.type)).toEqual(["snapshot", "outcome"]);
    }
  });

  it("buffers until a frame is complete", () => {
    const decoder = new FrameDecoder();
    const encoded = encodeFrame("hello", { version: 1 });
    expect(decoder.push(encoded.subarray(0, 2))).toEqual([]);
    expect(decoder.push(encoded.subarray(2, 5))).toEqual([]);
    expect(decoder.push(encoded.subarray(5))).toHaveLength(1);
  });

  it("length prefix is 4-byte big-endian of the JSON body", () => {
    const encoded = encodeFrame("x", null);
    const body = encoded.subarray(4);
    expect(encoded.readUInt32BE(0)).toBe(body.length);
    expect(JSON.parse(body.toString("utf8"))).toEqual({ type: "x", payload: null });
  });
});
