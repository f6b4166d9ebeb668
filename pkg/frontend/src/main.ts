import { ApiClient } from "./api.js";
import { parseTableCsv } from "./csv.js";
import { renderApp } from "./render.js";
import { SessionController } from "./state.js";
import { CreateSessionRequest } from "./types.js";

const API_BASE =
  (import.meta as { env?: { VITE_API_BASE?: string } }).env?.VITE_API_BASE ??
  "http://127.0.0.1:8000";

export function mount(root: HTMLElement, api = new ApiClient(API_BASE)): SessionController {
  const controller = new SessionController(api);

  const redraw = () => {
    const { view, notice, fieldErrors } = controller.state;
    root.innerHTML = renderApp(view, { notice, fieldErrors });
  };
  controller.onChange(redraw);

  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const button = target.closest<HTMLButtonElement>("button.choice");
    if (button && !button.disabled) {
      const preferred = Number(button.dataset.preferred);
      const other = Number(button.dataset.other);
      void controller
        .answer(preferred, other)
        .then(() => controller.waitUntilInteractive());
    }
  });

  root.addEventListener("submit", (ev) => {
    const form = ev.target as HTMLFormElement;
    if (form.id !== "setup-form") return;
    ev.preventDefault();
    void submitSetup(form, controller);
  });

  redraw();
  return controller;
}

async function submitSetup(
  form: HTMLFormElement,
  controller: SessionController,
): Promise<void> {
  const data = new FormData(form);
  const horizon = Number(data.get("horizon"));
  const req: CreateSessionRequest = { horizon };
  const file = data.get("csv");
  if (file instanceof File && file.size > 0) {
    const parsed = parseTableCsv(await file.text());
    if (parsed.errors.length > 0 || !parsed.table) {
      controller.state.fieldErrors.push(...parsed.errors);
      form.closest("section")?.insertAdjacentHTML(
        "beforeend",
        `<ul class="errors">${parsed.errors.map((e) => `<li class="field-error">${e}</li>`).join("")}</ul>`,
      );
      return;
    }
    req.table = parsed.table;
  }
  if (await controller.create(req)) {
    await controller.waitUntilInteractive();
  }
}

const rootEl = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootEl) {
  mount(rootEl);
}
