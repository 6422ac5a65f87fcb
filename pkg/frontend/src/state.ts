import type { AttributeSchema, EditRequestPayload } from "./types.js";

/**
 * Editor state: the uploaded image, per-attribute slider values, which
 * attributes the user actually touched, and per-attribute style picks.
 * Only touched attributes travel in requests; the service resolves the
 * rest from its own classifier, which is what keeps an untouched editor
 * equivalent to a reconstruction.
 */
export interface EditorState {
  schema: AttributeSchema | null;
  imageBase64: string | null;
  sliders: Record<string, number>;
  touched: string[];
  styles: Record<string, number>;
  resolved: Record<string, number>;
  previewBase64: string | null;
  latencyMs: number | null;
  inFlight: boolean;
}

export function initialState(): EditorState {
  return {
    schema: null,
    imageBase64: null,
    sliders: {},
    touched: [],
    styles: {},
    resolved: {},
    previewBase64: null,
    latencyMs: null,
    inFlight: false,
  };
}

export function withSchema(state: EditorState, schema: AttributeSchema): EditorState {
  const sliders: Record<string, number> = {};
  for (const name of schema.names) sliders[name] = 0;
  return { ...initialState(), imageBase64: state.imageBase64, schema, sliders };
}

const clamp01 = (value: number) => Math.min(1, Math.max(0, value));

export function setSlider(state: EditorState, name: string, value: number): EditorState {
  if (!state.schema || !state.schema.names.includes(name)) {
    throw new Error(`unknown attribute ${name}`);
  }
  const touched = state.touched.includes(name)
    ? state.touched
    : [...state.touched, name];
  return {
    ...state,
    sliders: { ...state.sliders, [name]: clamp01(value) },
    touched,
  };
}

export function setToggle(state: EditorState, name: string, on: boolean): EditorState {
  return setSlider(state, name, on ? 1 : 0);
}

export function setStyle(state: EditorState, name: string, index: number): EditorState {
  if (!state.schema) throw new Error("no schema loaded");
  const position = state.schema.names.indexOf(name);
  if (position < 0) throw new Error(`unknown attribute ${name}`);
  const count = state.schema.style_counts[position] ?? 1;
  if (!Number.isInteger(index) || index < 0 || index >= count) {
    throw new Error(`style index ${index} outside [0, ${count}) for ${name}`);
  }
  return { ...state, styles: { ...state.styles, [name]: index } };
}

/** Build the request payload: touched attributes only, styles only where picked. */
export function buildEditRequest(state: EditorState): EditRequestPayload {
  if (!state.imageBase64) throw new Error("no source image loaded");
  const target: Record<string, number> = {};
  for (const name of state.touched) {
    target[name] = state.sliders[name] ?? 0;
  }
  const payload: EditRequestPayload = { image: state.imageBase64, target };
  if (Object.keys(state.styles).length > 0) {
    payload.styles = { ...state.styles };
  }
  return payload;
}
