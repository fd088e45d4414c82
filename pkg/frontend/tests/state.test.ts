import { describe, expect, it } from "vitest";
import {
  DEFAULT_VIEW,
  decodeViewState,
  EditHistory,
  effectiveChannel,
  encodeViewState,
  snapRegion,
  ViewState,
} from "../src/state.js";

describe("view state URL encoding", () => {
  it("round-trips a fully populated state", () => {
    const s: ViewState = {
      sessionId: "abc123",
      stage: 1,
      channel: "sigma_r",
      opacity: 0.75,
      region: [8, 16, 24, 32],
      compareMode: "wipe",
    };
    expect(decodeViewState(encodeViewState(s))).toEqual(s);
  });

  it("encodes the default state as an empty query", () => {
    expect(encodeViewState(DEFAULT_VIEW)).toBe("");
    expect(decodeViewState("")).toEqual(DEFAULT_VIEW);
  });

  it("ignores malformed regions and channels", () => {
    const s = decodeViewState("r=1,2&ch=bogus&op=7");
    expect(s.region).toBeNull();
    expect(s.channel).toBe("none");
    expect(s.opacity).toBe(1); // clamped
  });
});

describe("overlay channel invariant", () => {
  it("renders no overlay without a selected stage", () => {
    const s: ViewState = { ...DEFAULT_VIEW, channel: "sigma_r", stage: null };
    expect(effectiveChannel(s)).toBe("none");
    expect(effectiveChannel({ ...s, stage: 0 })).toBe("sigma_r");
  });
});

describe("region snapping", () => {
  it("snaps outward to the patch grid", () => {
    expect(snapRegion(3, 5, 12, 14, 8, 64, 64)).toEqual([0, 0, 16, 16]);
  });

  it("normalizes a reversed drag", () => {
    expect(snapRegion(12, 14, 3, 5, 8, 64, 64)).toEqual([0, 0, 16, 16]);
  });

  it("clips to the image bounds", () => {
    expect(snapRegion(-10, 60, 70, 70, 8, 64, 64)).toEqual([0, 56, 64, 64]);
  });

  it("returns null for an empty selection", () => {
    expect(snapRegion(70, 70, 80, 80, 8, 64, 64)).toBeNull();
  });

  it("keeps an exact patch rectangle unchanged", () => {
    expect(snapRegion(8, 8, 16, 16, 8, 64, 64)).toEqual([8, 8, 16, 16]);
  });
});

describe("edit history", () => {
  const edit = (m: number) => ({
    stage: 0,
    region: [0, 0, 8, 8] as [number, number, number, number],
    multiplier_r: m,
  });

  it("undo returns the remaining prefix to replay", () => {
    const h = new EditHistory();
    h.push(edit(2));
    h.push(edit(3));
    expect(h.undo()).toEqual([edit(2)]);
    expect(h.length).toBe(1);
    expect(h.undo()).toEqual([]);
  });

  it("list returns a copy", () => {
    const h = new EditHistory();
    h.push(edit(2));
    h.list().pop();
    expect(h.length).toBe(1);
  });
});
