export interface AttributeSchema {
  names: string[];
  style_counts: number[];
}

export interface EditRequestPayload {
  image: string; // base64 PNG/JPEG
  target: Record<string, number>;
  styles?: Record<string, number>;
}

export interface EditResponsePayload {
  image: string; // base64 PNG
  attributes: Record<string, number>;
  latency_ms: number;
}

export interface FieldError {
  field?: string;
  message?: string;
  id?: string;
}

export function parseSchema(raw: unknown): AttributeSchema {
  const obj = raw as Partial<AttributeSchema> | null;
  if (
    !obj ||
    !Array.isArray(obj.names) ||
    !Array.isArray(obj.style_counts) ||
    obj.names.length !== obj.style_counts.length ||
    obj.names.some((n) => typeof n !== "string") ||
    obj.style_counts.some((c) => !Number.isInteger(c) || (c as number) < 1)
  ) {
    throw new Error("malformed attribute schema from the service");
  }
  return { names: [...obj.names], style_counts: [...(obj.style_counts as number[])] };
}

/**
 * Validate an outgoing edit request against the service schema.
 * Returns a list of problems; an empty list means the payload is sendable.
 */
export function validateEditRequest(
  payload: EditRequestPayload,
  schema: AttributeSchema,
): string[] {
  const problems: string[] = [];
  if (typeof payload.image !== "string" || payload.image.length === 0) {
    problems.push("image: missing base64 payload");
  }
  for (const [name, value] of Object.entries(payload.target)) {
    if (!schema.names.includes(name)) {
      problems.push(`target.${name}: unknown attribute`);
    } else if (typeof value !== "number" || !(value >= 0 && value <= 1)) {
      problems.push(`target.${name}: value ${value} outside [0, 1]`);
    }
  }
  for (const [name, index] of Object.entries(payload.styles ?? {})) {
    const position = schema.names.indexOf(name);
    if (position < 0) {
      problems.push(`styles.${name}: unknown attribute`);
      continue;
    }
    const count = schema.style_counts[position] ?? 1;
    if (!Number.isInteger(index) || index < 0 || index >= count) {
      problems.push(`styles.${name}: index ${index} outside [0, ${count})`);
    }
  }
  return problems;
}
