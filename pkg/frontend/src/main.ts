/** Browser entry point: wire the API, storage, state, and DOM together. */

import { runExchange, startOrResume } from "./app.js";
import { TutorApi } from "./api.js";
import { memoryStorage, type SessionStorageLike } from "./storage.js";
import type { ChatViewState } from "./types.js";
import { buildLayout, render, renderModules, type UiCallbacks } from "./ui.js";

function pickStorage(): SessionStorageLike {
  try {
    window.localStorage.setItem("tutorkit.probe", "1");
    window.localStorage.removeItem("tutorkit.probe");
    return window.localStorage;
  } catch {
    return memoryStorage();
  }
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const api = new TutorApi(window.location.origin);
  const storage = pickStorage();

  let state: ChatViewState;
  const paint = (next: ChatViewState) => {
    state = next;
    render(root, next);
  };

  const send = async (text: string) => {
    const final = await runExchange(api, state, text, paint);
    paint(final);
  };

  const callbacks: UiCallbacks = {
    onSend: send,
    onStarter: send,
    onModuleChange: (moduleId) => paint({ ...state, moduleId }),
    onRetry: () => void start(),
  };
  buildLayout(root, callbacks);

  const start = async () => {
    paint(await startOrResume(api, storage));
    if (state.banner === null) {
      try {
        renderModules(root, await api.listModules(), callbacks);
      } catch {
        // module list is a convenience; chat still works without it
      }
    }
  };
  await start();
}

void boot();
