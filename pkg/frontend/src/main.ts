/** Browser bootstrap. Everything testable lives in the other modules. */

import { ApiClient } from "./api.js";
import { keyAction } from "./keyboard.js";
import { ReviewStore } from "./state.js";
import { renderApp } from "./ui.js";

const POLL_MS = 5000;

function config(): { baseUrl: string; token?: string } {
  const params = new URLSearchParams(window.location.search);
  return {
    baseUrl: params.get("api") ?? "http://127.0.0.1:8400",
    token: params.get("token") ?? undefined,
  };
}

async function boot(root: HTMLElement): Promise<void> {
  const { baseUrl, token } = config();
  const store = new ReviewStore(new ApiClient({ baseUrl, token }));

  const paint = () => {
    root.innerHTML = renderApp(store.snapshot());
  };

  await store.loadSources();
  paint();
  for (const item of store.snapshot().items) {
    await store.loadCandidates(item.source.name);
    paint();
  }

  root.addEventListener("keydown", (event) => {
    const action = keyAction(event.key);
    if (!action) return;
    const article = (event.target as HTMLElement).closest("article[data-source]");
    const source = article?.getAttribute("data-source");
    if (!source) return;
    if (action.kind === "skip") {
      store.skip(source);
      paint();
      return;
    }
    const item = store
      .snapshot()
      .items.find((i) => i.source.name === source);
    const top = item?.list?.candidates[0];
    if (!top) return;
    void store.submitVerdict(source, top.target, action.verdict).then(paint);
    paint();
  });

  window.setInterval(() => {
    const before = store.snapshot().version;
    void store.pollVersion().then(async () => {
      if (store.snapshot().version !== before) {
        // new model: lists were flushed, refetch what is on screen
        for (const item of store.snapshot().items) {
          await store.loadCandidates(item.source.name);
        }
      }
      paint();
    });
  }, POLL_MS);
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) void boot(root);
}
