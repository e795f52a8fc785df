/** DOM rendering. Rebuilds the chat column from state on every change. */

import type { ChatViewState, ModuleInfo } from "./types.js";

export interface UiCallbacks {
  onSend: (text: string) => void;
  onStarter: (text: string) => void;
  onModuleChange: (moduleId: string | null) => void;
  onRetry: () => void;
}

export function buildLayout(root: HTMLElement, callbacks: UiCallbacks): void {
  root.innerHTML = `
    <div class="banner" hidden></div>
    <div class="toast" hidden></div>
    <div class="topbar">
      <label>Module
        <select class="module-select"><option value="">auto</option></select>
      </label>
    </div>
    <div class="starters"></div>
    <div class="messages"></div>
    <form class="composer">
      <input type="text" class="composer-input" placeholder="Ask about the course..." autocomplete="off" />
      <button type="submit" class="composer-send">Send</button>
    </form>
  `;
  const form = root.querySelector<HTMLFormElement>(".composer")!;
  const input = root.querySelector<HTMLInputElement>(".composer-input")!;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value;
    if (!text.trim()) return;
    input.value = "";
    callbacks.onSend(text);
  });
  const select = root.querySelector<HTMLSelectElement>(".module-select")!;
  select.addEventListener("change", () => {
    callbacks.onModuleChange(select.value || null);
  });
  root.querySelector<HTMLElement>(".banner")!.addEventListener("click", () => {
    callbacks.onRetry();
  });
}

export function renderModules(
  root: HTMLElement,
  modules: ModuleInfo[],
  callbacks: UiCallbacks,
): void {
  const select = root.querySelector<HTMLSelectElement>(".module-select")!;
  for (const module of modules) {
    const option = document.createElement("option");
    option.value = module.id;
    option.textContent = module.title;
    select.appendChild(option);
  }
  // task statements double as one-click conversation starters
  const starters = root.querySelector<HTMLElement>(".starters")!;
  starters.innerHTML = "";
  for (const module of modules) {
    for (const task of module.tasks) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "starter";
      button.textContent = task;
      button.addEventListener("click", () => callbacks.onStarter(task));
      starters.appendChild(button);
    }
  }
}

export function render(root: HTMLElement, state: ChatViewState): void {
  const banner = root.querySelector<HTMLElement>(".banner")!;
  banner.hidden = state.banner === null;
  banner.textContent = state.banner ? `${state.banner} (click to retry)` : "";

  const toast = root.querySelector<HTMLElement>(".toast")!;
  toast.hidden = state.toast === null;
  toast.textContent = state.toast ?? "";

  const list = root.querySelector<HTMLElement>(".messages")!;
  list.innerHTML = "";
  for (const message of state.messages) {
    const bubble = document.createElement("div");
    bubble.className = `bubble ${message.role}${message.error ? " errored" : ""}`;
    const text = document.createElement("p");
    text.textContent = message.text;
    bubble.appendChild(text);
    if (message.meta) {
      const badge = document.createElement("span");
      badge.className = "badge";
      const hint =
        message.meta.hint_level > 0 ? ` · hint ${message.meta.hint_level}` : "";
      badge.textContent = `${message.meta.intent} · ${message.meta.strategy}${hint}`;
      bubble.appendChild(badge);
    }
    if (message.error) {
      const mark = document.createElement("span");
      mark.className = "error-mark";
      mark.textContent = `⚠ ${message.error}`;
      bubble.appendChild(mark);
    }
    list.appendChild(bubble);
  }
  list.scrollTop = list.scrollHeight;

  const send = root.querySelector<HTMLButtonElement>(".composer-send")!;
  send.disabled = state.streaming;
  const input = root.querySelector<HTMLInputElement>(".composer-input")!;
  input.disabled = state.streaming;
}
