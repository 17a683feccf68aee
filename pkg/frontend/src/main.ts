/** Browser bootstrap: session list at #/, one session per screen at #<id>. */
import { AuditServiceClient } from "./api.js";
import { SessionController, marksToBits } from "./controller.js";
import { renderSession, renderSessionList } from "./render.js";

const client = new AuditServiceClient("");
const root = document.getElementById("app") as HTMLElement;
let controller: SessionController | null = null;

function wireForm(): void {
  const form = document.getElementById("entry") as HTMLFormElement | null;
  if (!form || !controller) {
    return;
  }
  const ctl = controller;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const checked = Array.from(
      form.querySelectorAll<HTMLInputElement>("input[type=checkbox]:checked"),
    ).map((el) => Number(el.dataset.index));
    const n = form.querySelectorAll("input[type=checkbox]").length;
    void ctl.submit("interpretation", marksToBits(checked, n));
  });
  document.getElementById("no-marks")?.addEventListener("click", () => {
    const n = form.querySelectorAll("input[type=checkbox]").length;
    void ctl.submit("interpretation", marksToBits([], n));
  });
  document.getElementById("no-ballot")?.addEventListener("click", () => {
    void ctl.submit("no_ballot");
  });
}

async function showList(): Promise<void> {
  controller?.stop();
  controller = null;
  const sessions = await client.listSessions();
  root.innerHTML = `<h1>Audit sessions</h1>` + renderSessionList(sessions);
}

function showSession(id: string): void {
  controller?.stop();
  controller = new SessionController(client, id, {
    onView: (view, stale) => {
      root.innerHTML =
        (stale ? `<div class="banner warn">Connection lost; showing last known state.</div>` : "") +
        renderSession(view);
      wireForm();
    },
  });
  controller.start();
}

function route(): void {
  const id = window.location.hash.replace(/^#\/?/, "");
  if (id) {
    showSession(id);
  } else {
    void showList();
  }
}

window.addEventListener("hashchange", route);
route();
