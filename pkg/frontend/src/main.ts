/** Studio wiring: canvases, sliders, session loop. Browser entry point. */
import { StudioApi } from "./api.js";
import { MaskBuffer } from "./mask.js";
import {
  CAMERA_PRESETS,
  ObservationMode,
  azimuthCamera,
  canSubmit,
  paintToObservation,
} from "./observation.js";
import { drawScatter, flagColors, projectOrbit } from "./scatter.js";
import { StudioSession } from "./session.js";

const CANVAS_PX = 320;
const CM_PER_PIXEL = 0.75;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setupPaint(
  canvas: HTMLCanvasElement,
  mask: MaskBuffer,
  onChange: () => void,
): void {
  const ctx = canvas.getContext("2d")!;
  let painting = false;
  let erasing = false;

  const redraw = () => {
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#e0534a";
    for (const [i, j] of mask.foregroundPixels()) {
      ctx.fillRect(i, j, 1, 1);
    }
  };

  const stampAt = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    const i = ((ev.clientX - rect.left) / rect.width) * mask.width;
    const j = ((ev.clientY - rect.top) / rect.height) * mask.height;
    mask.stamp(i, j, 7, erasing ? 0 : 1);
    redraw();
    onChange();
  };

  canvas.addEventListener("pointerdown", (ev) => {
    painting = true;
    erasing = ev.shiftKey || ev.button === 2;
    stampAt(ev);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (painting) stampAt(ev);
  });
  window.addEventListener("pointerup", () => {
    painting = false;
  });
  canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
  redraw();
}

function main(): void {
  const api = new StudioApi("");
  const session = new StudioSession(api);

  const silhouetteMask = new MaskBuffer(CANVAS_PX, CANVAS_PX, CM_PER_PIXEL);
  const patternMask = new MaskBuffer(CANVAS_PX, CANVAS_PX, CM_PER_PIXEL);

  const silhouetteCanvas = el<HTMLCanvasElement>("silhouette-canvas");
  const patternCanvas = el<HTMLCanvasElement>("pattern-canvas");
  const domainView = el<HTMLCanvasElement>("domain-view");
  const drapeView = el<HTMLCanvasElement>("drape-view");
  const status = el<HTMLDivElement>("status");
  const submitSilhouette = el<HTMLButtonElement>("submit-silhouette");
  const submitPattern = el<HTMLButtonElement>("submit-pattern");
  const generateBtn = el<HTMLButtonElement>("generate");
  const undoBtn = el<HTMLButtonElement>("undo");
  const cameraSelect = el<HTMLSelectElement>("camera");
  const azimuthInput = el<HTMLInputElement>("azimuth");
  const optN = el<HTMLInputElement>("opt-n");
  const stopT = el<HTMLInputElement>("stop-t");
  const steps = el<HTMLInputElement>("steps");
  const nPoints = el<HTMLInputElement>("n-points");
  const obsCount = el<HTMLInputElement>("obs-count");
  const seedInput = el<HTMLInputElement>("seed");

  const orbit = { azimuthDeg: 20, elevationDeg: 15, zoom: 1 };

  const refreshButtons = () => {
    submitSilhouette.disabled = session.busy || !canSubmit(silhouetteMask);
    submitPattern.disabled = session.busy || !canSubmit(patternMask);
    generateBtn.disabled = session.busy;
    undoBtn.disabled = session.busy || session.cursor <= 0;
  };

  setupPaint(silhouetteCanvas, silhouetteMask, refreshButtons);
  setupPaint(patternCanvas, patternMask, refreshButtons);

  const renderViews = () => {
    const entry = session.current;
    if (!entry) return;
    const colors = flagColors(entry.particles.flags);
    const uv = entry.particles.points.map(
      (p) => [p[0], p[1]] as [number, number]);
    drawScatter(domainView.getContext("2d")!, uv, colors,
                domainView.width, domainView.height);
    const xyz = entry.particles.points.map(
      (p) => [p[2], p[3], p[4]] as [number, number, number]);
    const projected = projectOrbit(xyz, orbit).map(
      (p) => [p[0], p[1]] as [number, number]);
    drawScatter(drapeView.getContext("2d")!, projected, colors,
                drapeView.width, drapeView.height);
  };

  let dragging = false;
  let last: [number, number] = [0, 0];
  drapeView.addEventListener("pointerdown", (ev) => {
    dragging = true;
    last = [ev.clientX, ev.clientY];
  });
  window.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    orbit.azimuthDeg += (ev.clientX - last[0]) * 0.5;
    orbit.elevationDeg = Math.max(
      -89, Math.min(89, orbit.elevationDeg + (ev.clientY - last[1]) * 0.5));
    last = [ev.clientX, ev.clientY];
    renderViews();
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
  });

  session.onChange(() => {
    status.textContent = session.busy
      ? `running… ${(100 * session.progress).toFixed(0)}%`
      : session.lastError
        ? `error: ${session.lastError}`
        : session.current
          ? `job ${session.current.jobId} (${session.current.hash.slice(0, 8)})`
          : "no garment yet";
    refreshButtons();
    renderViews();
    localStorage.setItem(
      "studio-session", JSON.stringify(session.history.map((h) => h.jobId)));
  });

  const currentCamera = (): number[][] => {
    const preset = cameraSelect.value;
    if (preset === "azimuth") return azimuthCamera(Number(azimuthInput.value));
    return CAMERA_PRESETS[preset];
  };

  const settings = () => ({
    steps: Number(steps.value),
    stopT: Number(stopT.value),
    eta: null,
    optN: Number(optN.value),
    nPoints: Number(nPoints.value) || null,
    seed: Number(seedInput.value),
  });

  const submit = (mode: ObservationMode, mask: MaskBuffer) => {
    const observation = paintToObservation(
      mask, mode, Number(obsCount.value), Number(seedInput.value),
      mode === "silhouette" ? currentCamera() : null);
    session.submitEdit(observation, settings()).catch(() => undefined);
  };

  submitSilhouette.addEventListener("click", () => submit("silhouette", silhouetteMask));
  submitPattern.addEventListener("click", () => submit("pattern", patternMask));
  generateBtn.addEventListener("click", () => {
    session
      .generate(Number(nPoints.value) || 96, Number(steps.value), Number(seedInput.value))
      .catch(() => undefined);
  });
  undoBtn.addEventListener("click", () => {
    session.undo();
  });

  const persisted = localStorage.getItem("studio-session");
  if (persisted) {
    session.resume(JSON.parse(persisted)).catch(() => undefined);
  }
  refreshButtons();
}

main();
