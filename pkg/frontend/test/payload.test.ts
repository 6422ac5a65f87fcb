import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  parseSchema,
  validateEditRequest,
  type EditResponsePayload,
} from "../src/types.js";

// Fixtures recorded from a live service run (see test/fixtures/README).
const fixture = (name: string) =>
  JSON.parse(readFileSync(join(__dirname, "fixtures", name), "utf-8"));

describe("recorded service fixtures", () => {
  it("the /attributes fixture parses as a schema", () => {
    const schema = parseSchema(fixture("attributes.json"));
    expect(schema.names).toEqual([
      "Eyeglasses",
      "Bangs",
      "Pale_Skin",
      "Mouth_Open",
    ]);
    expect(schema.style_counts).toHaveLength(schema.names.length);
  });

  it("a well-formed edit request validates against the fixture schema", () => {
    const schema = parseSchema(fixture("attributes.json"));
    const payload = {
      image: "aGVsbG8=",
      target: { Eyeglasses: 1, Bangs: 0.25 },
    };
    expect(validateEditRequest(payload, schema)).toEqual([]);
  });

  it("violations are reported per field", () => {
    const schema = parseSchema(fixture("attributes.json"));
    const problems = validateEditRequest(
      {
        image: "aGVsbG8=",
        target: { Eyeglasses: 1.5, Nose: 1 },
        styles: { Bangs: 7 },
      },
      schema,
    );
    expect(problems.some((p) => p.startsWith("target.Eyeglasses"))).toBe(true);
    expect(problems.some((p) => p.startsWith("target.Nose"))).toBe(true);
    expect(problems.some((p) => p.startsWith("styles.Bangs"))).toBe(true);
  });

  it("a missing image is a validation problem", () => {
    const schema = parseSchema(fixture("attributes.json"));
    const problems = validateEditRequest({ image: "", target: {} }, schema);
    expect(problems).toHaveLength(1);
    expect(problems[0]).toContain("image");
  });

  it("the recorded /edit response has the documented shape", () => {
    const response = fixture("edit_response.json") as EditResponsePayload;
    expect(typeof response.image).toBe("string");
    expect(response.image.length).toBeGreaterThan(0);
    expect(Object.keys(response.attributes)).toHaveLength(4);
    for (const value of Object.values(response.attributes)) {
      expect(value).toBeGreaterThanOrEqual(0);
      expect(value).toBeLessThanOrEqual(1);
    }
    expect(response.latency_ms).toBeGreaterThan(0);
    // the image field must be decodable base64
    expect(() => Buffer.from(response.image, "base64")).not.toThrow();
    const png = Buffer.from(response.image, "base64");
    expect(png.subarray(1, 4).toString("ascii")).toBe("PNG");
  });

  it("malformed schemas are rejected", () => {
    expect(() => parseSchema({ names: ["A"], style_counts: [] })).toThrow();
    expect(() => parseSchema({ names: ["A"], style_counts: [0] })).toThrow();
    expect(() => parseSchema(null)).toThrow();
  });
});
