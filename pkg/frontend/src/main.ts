import { EditClient, ApiError } from "./api.js";
import {
  clearFieldErrors,
  renderControls,
  showBanner,
  showFieldError,
} from "./controls.js";
import { LatestWins, debounce } from "./debounce.js";
import {
  buildEditRequest,
  initialState,
  setSlider,
  setStyle,
  setToggle,
  withSchema,
  type EditorState,
} from "./state.js";
import { validateEditRequest } from "./types.js";

const DEBOUNCE_MS = 150;

const $ = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
};

let state: EditorState = initialState();
const dispatcher = new LatestWins<Awaited<ReturnType<EditClient["edit"]>>>();
let client = new EditClient("http://127.0.0.1:8587");

function submitEdit(): void {
  if (!state.imageBase64 || !state.schema) return;
  const payload = buildEditRequest(state);
  const problems = validateEditRequest(payload, state.schema);
  const banner = $("banner");
  clearFieldErrors($("controls"));
  if (problems.length > 0) {
    showBanner(banner, `invalid request: ${problems.join("; ")}`);
    return;
  }
  const status = $("status");
  status.textContent = "editing…";
  void dispatcher.dispatch(
    () => client.edit(payload),
    (response) => {
      state = {
        ...state,
        previewBase64: response.image,
        resolved: response.attributes,
        latencyMs: response.latency_ms,
      };
      ($("preview") as HTMLImageElement).src =
        `data:image/png;base64,${response.image}`;
      status.textContent = `edited in ${response.latency_ms.toFixed(1)} ms`;
    },
    (error) => {
      if (error instanceof ApiError && error.status === 400 && error.field) {
        showFieldError($("controls"), error.field, error.message);
        status.textContent = "validation failed";
      } else {
        showBanner($("banner"), `edit failed: ${String(error)}`, submitEdit);
        status.textContent = "error";
      }
    },
  );
}

const debouncedSubmit = debounce(submitEdit, DEBOUNCE_MS);

async function loadSchema(): Promise<void> {
  const banner = $("banner");
  try {
    const schema = await client.attributes();
    state = withSchema(state, schema);
    renderControls($("controls"), schema, {
      onToggle: (name, on) => {
        state = setToggle(state, name, on);
        debouncedSubmit.call();
      },
      onSlider: (name, value) => {
        state = setSlider(state, name, value);
        debouncedSubmit.call();
      },
      onStyle: (name, index) => {
        state = setStyle(state, name, index);
        debouncedSubmit.call();
      },
    });
    const health = await client.health();
    $("status").textContent = `connected (checkpoint ${health.checkpoint_id})`;
  } catch (error) {
    showBanner(banner, `service unreachable: ${String(error)}`, () => {
      void loadSchema();
    });
  }
}

function wireUpload(): void {
  const input = $("upload") as HTMLInputElement;
  input.addEventListener("change", () => {
    const file = input.files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      const base64 = url.slice(url.indexOf(",") + 1);
      dispatcher.invalidate();
      state = { ...state, imageBase64: base64, previewBase64: null };
      ($("source") as HTMLImageElement).src = url;
      submitEdit(); // immediate first pass: reconstruction-style preview
    };
    reader.readAsDataURL(file);
  });
}

function wireApiBase(): void {
  const field = $("api-base") as HTMLInputElement;
  const params = new URLSearchParams(window.location.search);
  const fromQuery = params.get("api");
  if (fromQuery) field.value = fromQuery;
  client = new EditClient(field.value);
  field.addEventListener("change", () => {
    client = new EditClient(field.value);
    void loadSchema();
  });
}

wireApiBase();
wireUpload();
void loadSchema();
