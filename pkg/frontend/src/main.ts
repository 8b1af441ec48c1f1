/** Browser bootstrap: wires the view models onto the static page. */

import { ApiClient, ApiError, ServiceUnreachable } from "./api.js";
import { makeCaseCard, ReviewQueue, type ReviewDecision } from "./cards.js";
import { CalibrationPanel } from "./calibration.js";
import { RetrievalGallery } from "./gallery.js";
import {
  renderApiError,
  renderBanner,
  renderCalibration,
  renderCaseCard,
  renderGalleryRow,
  renderLibraryStatus,
  renderReviewQueue,
} from "./render.js";
import { StatusModel } from "./status.js";

const REVIEWERS = ["reader_a", "reader_b"];

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el;
}

/** Show an error where the view's output would go; offline flips the banner. */
function showError(target: HTMLElement, banner: HTMLElement, err: unknown): void {
  if (err instanceof ApiError) {
    target.innerHTML = renderApiError({ code: err.code, message: err.message, detail: err.detail });
    return;
  }
  if (err instanceof ServiceUnreachable) {
    banner.innerHTML = renderBanner({ online: false, reason: err.message, lastHealth: null });
    return;
  }
  throw err;
}

export function boot(baseUrl: string): void {
  const client = new ApiClient(baseUrl);
  const status = new StatusModel(client);
  const queue = new ReviewQueue();
  const gallery = new RetrievalGallery(REVIEWERS);
  const calibration = new CalibrationPanel(client);

  const banner = byId("banner");
  const detail = byId("diagnosis-detail");
  const queueView = byId("review-queue");
  const galleryView = byId("retrieval-gallery");
  const calibrationView = byId("calibration-panel");
  const statusView = byId("library-status");
  let caseCounter = 0;

  const refreshStatus = async () => {
    const state = await status.refresh();
    banner.innerHTML = renderBanner(state);
    if (state.lastHealth !== null) {
      statusView.innerHTML = renderLibraryStatus(state.lastHealth);
    }
  };

  byId("submit-case").addEventListener("submit", async (event) => {
    event.preventDefault();
    const form = event.currentTarget as HTMLFormElement;
    const vectorText = (form.elements.namedItem("vector") as HTMLTextAreaElement).value;
    const confident = (form.elements.namedItem("confident") as HTMLInputElement).checked;
    let vector: number[];
    try {
      vector = JSON.parse(vectorText);
    } catch {
      detail.innerHTML = renderApiError({
        code: "BAD_INPUT",
        message: "vector must be a JSON array of numbers",
        detail: {},
      });
      return;
    }
    try {
      const resp = confident
        ? await client.diagnoseConfident({ vector })
        : await client.diagnose({ vector });
      caseCounter += 1;
      const card = makeCaseCard(`case-${caseCounter}`, resp);
      detail.innerHTML = renderCaseCard(card);
      if (queue.add(card)) {
        queueView.innerHTML = renderReviewQueue(queue.pending());
      }
    } catch (err) {
      showError(detail, banner, err);
    }
  });

  queueView.addEventListener("click", (event) => {
    const button = event.target as HTMLElement;
    const decision = button.dataset.decision as ReviewDecision | undefined;
    const caseId = button.closest("li")?.dataset.case;
    if (decision === undefined || caseId === undefined) {
      return;
    }
    const newLabel =
      decision === "relabel" ? window.prompt("replacement label") ?? undefined : undefined;
    if (decision === "relabel" && !newLabel) {
      return;
    }
    queue.decide(caseId, decision, newLabel);
    queueView.innerHTML = renderReviewQueue(queue.pending());
  });

  byId("retrieve-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const form = event.currentTarget as HTMLFormElement;
    const vectorText = (form.elements.namedItem("vector") as HTMLTextAreaElement).value;
    const queryId = (form.elements.namedItem("query_id") as HTMLInputElement).value || `q${gallery.queries().length + 1}`;
    try {
      const resp = await client.retrieve({ vector: JSON.parse(vectorText), k: 10 });
      gallery.add(queryId, resp.hits);
      galleryView.innerHTML = gallery
        .queries()
        .map((row) => renderGalleryRow(row, gallery.reviewers))
        .join("");
    } catch (err) {
      showError(galleryView, banner, err);
    }
  });

  galleryView.addEventListener("click", (event) => {
    const button = event.target as HTMLElement;
    if (!button.classList.contains("verdict")) {
      return;
    }
    const { query, reviewer, rank } = button.dataset;
    if (query === undefined || reviewer === undefined || rank === undefined) {
      return;
    }
    const row = gallery.row(query);
    const current = (row?.verdicts.get(reviewer) as boolean[])[Number(rank)];
    gallery.setVerdict(query, reviewer, Number(rank), !current);
    galleryView.innerHTML = gallery
      .queries()
      .map((r) => renderGalleryRow(r, gallery.reviewers))
      .join("");
  });

  byId("export-sheet").addEventListener("click", () => {
    const sheet = JSON.stringify(gallery.toReviewSheet(), null, 2);
    const blob = new Blob([sheet], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "review_sheet.json";
    link.click();
    URL.revokeObjectURL(link.href);
  });

  byId("calibration-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const form = event.currentTarget as HTMLFormElement;
    const input = form.elements.namedItem("scored") as HTMLInputElement;
    const file = input.files?.[0];
    if (file === undefined) {
      return;
    }
    try {
      await calibration.upload(await file.text());
      calibrationView.innerHTML = renderCalibration(calibration.result());
      await refreshStatus();
    } catch (err) {
      showError(calibrationView, banner, err);
    }
  });

  byId("refresh-status").addEventListener("click", refreshStatus);
  void refreshStatus();
  window.setInterval(refreshStatus, 10_000);
}
