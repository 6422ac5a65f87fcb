import type { AttributeSchema } from "./types.js";

export interface ControlHandlers {
  onToggle: (name: string, on: boolean) => void;
  onSlider: (name: string, value: number) => void;
  onStyle: (name: string, index: number) => void;
}

/**
 * Render one row per attribute, in server order: a toggle, an intensity
 * slider over [0, 1], and a style picker only where the model actually has
 * more than one style. An empty schema renders an explicit no-model state.
 */
export function renderControls(
  container: HTMLElement,
  schema: AttributeSchema,
  handlers: ControlHandlers,
): void {
  container.textContent = "";
  if (schema.names.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-schema";
    empty.textContent = "No model loaded: the service reports no attributes.";
    container.appendChild(empty);
    return;
  }
  schema.names.forEach((name, position) => {
    const row = document.createElement("div");
    row.className = "attribute-row";
    row.dataset.attribute = name;

    const label = document.createElement("label");
    label.textContent = name;
    label.className = "attribute-name";
    row.appendChild(label);

    const toggle = document.createElement("input");
    toggle.type = "checkbox";
    toggle.className = "attribute-toggle";
    toggle.addEventListener("change", () => {
      slider.value = toggle.checked ? "1" : "0";
      handlers.onToggle(name, toggle.checked);
    });
    row.appendChild(toggle);

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = "0";
    slider.className = "attribute-slider";
    slider.addEventListener("input", () => {
      const value = Number(slider.value);
      toggle.checked = value >= 0.5;
      handlers.onSlider(name, value);
    });
    row.appendChild(slider);

    const value = document.createElement("span");
    value.className = "attribute-value";
    value.textContent = "0.00";
    slider.addEventListener("input", () => {
      value.textContent = Number(slider.value).toFixed(2);
    });
    row.appendChild(value);

    const styleCount = schema.style_counts[position] ?? 1;
    if (styleCount > 1) {
      const picker = document.createElement("select");
      picker.className = "style-picker";
      for (let i = 0; i < styleCount; i += 1) {
        const option = document.createElement("option");
        option.value = String(i);
        option.textContent = `style ${i}`;
        picker.appendChild(option);
      }
      picker.addEventListener("change", () => {
        handlers.onStyle(name, Number(picker.value));
      });
      row.appendChild(picker);
    }

    container.appendChild(row);
  });
}

export function showBanner(
  container: HTMLElement,
  message: string,
  onRetry?: () => void,
): void {
  container.textContent = "";
  container.classList.add("visible");
  const text = document.createElement("span");
  text.textContent = message;
  container.appendChild(text);
  if (onRetry) {
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.addEventListener("click", () => {
      container.classList.remove("visible");
      container.textContent = "";
      onRetry();
    });
    container.appendChild(retry);
  }
}

export function showFieldError(container: HTMLElement, field: string,
                               message: string): void {
  const row = container.querySelector<HTMLElement>(
    `[data-attribute="${field.replace(/^(target|styles)\./, "")}"]`,
  );
  const note = document.createElement("span");
  note.className = "field-error";
  note.textContent = message;
  (row ?? container).appendChild(note);
}

export function clearFieldErrors(container: HTMLElement): void {
  for (const node of Array.from(container.querySelectorAll(".field-error"))) {
    node.remove();
  }
}
