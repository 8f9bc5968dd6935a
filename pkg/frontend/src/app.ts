/** Browser wiring: canvas painting over the session image, prompt box,
 * live loss chart, and accept/revert controls. All logic lives in the
 * DOM-free modules; this file only moves pixels and events between them
 * and the page. */

import { ApiClient } from "./api.js";
import { EditViewController } from "./editView.js";
import { Point } from "./maskLayer.js";

const SCALE = 6; // 64x64 session images are displayed 384x384

function bytesToObjectUrl(bytes: Uint8Array): string {
  return URL.createObjectURL(new Blob([bytes as BlobPart], { type: "image/png" }));
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

export async function boot(): Promise<void> {
  const api = new ApiClient("");
  const view = await EditViewController.open(api, {
    generator: "toy-feature",
    scorer: "toy-colorshape",
  });

  const baseImg = el<HTMLImageElement>("base-image");
  const previewImg = el<HTMLImageElement>("preview-image");
  const overlay = el<HTMLCanvasElement>("mask-overlay");
  const status = el<HTMLElement>("status");
  const chartBox = el<HTMLElement>("chart");
  const prompt = el<HTMLInputElement>("prompt");
  const lambdaSlider = el<HTMLInputElement>("lambda");
  const radius = el<HTMLInputElement>("radius");
  const eraserToggle = el<HTMLInputElement>("eraser");
  const compareToggle = el<HTMLInputElement>("compare");
  const runButton = el<HTMLButtonElement>("run");
  const acceptButton = el<HTMLButtonElement>("accept");
  const revertButton = el<HTMLButtonElement>("revert");
  const clearButton = el<HTMLButtonElement>("clear");

  overlay.width = view.mask.width * SCALE;
  overlay.height = view.mask.height * SCALE;
  const ctx = overlay.getContext("2d")!;

  function redrawBase(): void {
    const bytes = view.visibleImage();
    if (bytes) baseImg.src = bytesToObjectUrl(bytes);
  }

  function redrawOverlay(): void {
    ctx.clearRect(0, 0, overlay.width, overlay.height);
    ctx.fillStyle = "rgba(255, 64, 64, 0.45)";
    const binary = view.mask.binary();
    for (let y = 0; y < view.mask.height; y++) {
      for (let x = 0; x < view.mask.width; x++) {
        if (binary[y * view.mask.width + x]) {
          ctx.fillRect(x * SCALE, y * SCALE, SCALE, SCALE);
        }
      }
    }
  }

  function setStatus(text: string): void {
    status.textContent = text;
  }

  function syncButtons(): void {
    acceptButton.disabled = !view.acceptEnabled;
    revertButton.disabled = view.editId === null || view.state === "streaming";
    runButton.disabled = view.state === "streaming";
  }

  let stroke: Point[] | null = null;
  function canvasPoint(event: MouseEvent): Point {
    const rect = overlay.getBoundingClientRect();
    return {
      x: (event.clientX - rect.left) / SCALE,
      y: (event.clientY - rect.top) / SCALE,
    };
  }
  overlay.addEventListener("mousedown", (event) => {
    stroke = [canvasPoint(event)];
  });
  overlay.addEventListener("mousemove", (event) => {
    if (stroke === null) return;
    stroke.push(canvasPoint(event));
    const r = Number(radius.value);
    if (eraserToggle.checked) view.mask.erase(stroke.slice(-2), r);
    else view.mask.paint(stroke.slice(-2), r);
    redrawOverlay();
  });
  window.addEventListener("mouseup", () => {
    if (stroke !== null && stroke.length === 1) {
      const r = Number(radius.value);
      if (eraserToggle.checked) view.mask.erase(stroke, r);
      else view.mask.paint(stroke, r);
      redrawOverlay();
    }
    stroke = null;
  });

  clearButton.addEventListener("click", () => {
    view.mask.clear();
    redrawOverlay();
  });

  compareToggle.addEventListener("change", () => {
    view.showOriginal = compareToggle.checked;
    redrawBase();
  });

  runButton.addEventListener("click", () => {
    void (async () => {
      try {
        const coverage = await view.uploadMask();
        setStatus(`mask uploaded (${(coverage * 100).toFixed(1)}% coverage)`);
      } catch (error) {
        setStatus(String(error));
        return;
      }
      syncButtons();
      setStatus("optimizing...");
      const tick = window.setInterval(() => {
        chartBox.innerHTML = view.chart.renderSvg();
        if (view.previewB64) {
          previewImg.src = `data:image/png;base64,${view.previewB64}`;
        }
        setStatus(
          `optimizing [${view.chart.phase}] step ${view.chart.stepCount} ` +
            `(${view.chart.elapsedSeconds.toFixed(1)}s)`,
        );
      }, 200);
      try {
        const outcome = await view.runEdit(prompt.value, {
          lambdaImg: Number(lambdaSlider.value),
        });
        setStatus(
          outcome.state === "done"
            ? "edit complete — accept or revert"
            : `edit failed: ${outcome.errorCode}`,
        );
      } finally {
        window.clearInterval(tick);
        chartBox.innerHTML = view.chart.renderSvg();
        syncButtons();
      }
    })();
  });

  acceptButton.addEventListener("click", () => {
    void view.accept().then(() => {
      redrawBase();
      view.mask.clear();
      redrawOverlay();
      setStatus("edit accepted");
      syncButtons();
    });
  });

  revertButton.addEventListener("click", () => {
    void view.revert().then(() => {
      previewImg.removeAttribute("src");
      setStatus("edit reverted");
      syncButtons();
    });
  });

  redrawBase();
  redrawOverlay();
  syncButtons();
  setStatus(`session ${view.session.session_id} ready — paint a region`);
}

if (typeof document !== "undefined" && document.getElementById("base-image")) {
  void boot();
}
