// Browser bootstrap: binds the controller to the static page.

import { ClarifyApi } from "./api.js";
import { App, Host } from "./app.js";

function domHost(root: HTMLElement, form: HTMLFormElement): Host {
  return {
    setContent(html: string) {
      root.innerHTML = html;
    },
    setBusy(busy: boolean) {
      for (const el of Array.from(form.elements)) {
        (el as HTMLInputElement).disabled = busy;
      }
      for (const button of Array.from(root.querySelectorAll("button"))) {
        button.disabled = busy;
      }
    },
  };
}

export function mount(document: Document): App {
  const root = document.getElementById("results") as HTMLElement;
  const form = document.getElementById("query-form") as HTMLFormElement;
  const input = document.getElementById("query-input") as HTMLInputElement;
  const app = new App(new ClarifyApi(), domHost(root, form));

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void app.submit(input.value);
  });
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button.choose")) {
      void app.choose(Number(target.dataset.index));
    } else if (target.matches("button.retry")) {
      void app.retry();
    }
  });
  return app;
}

if (typeof document !== "undefined") {
  mount(document);
}
