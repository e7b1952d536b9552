/**
 * Single-page refocusing client: control panel on the left, rendered image
 * and stats on the right.  All math happens server-side; this file only
 * wires DOM controls to the three service endpoints.
 */

import {
  ALPHA_MAX,
  ALPHA_MIN,
  Metadata,
  RenderResult,
  RenderScheduler,
  ServiceError,
  buildAllfocusUrl,
  buildRefocusUrl,
  fetchMetadata,
} from "./api.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const baseInput = el<HTMLInputElement>("base-url");
const alphaSlider = el<HTMLInputElement>("alpha");
const alphaValue = el<HTMLSpanElement>("alpha-value");
const epsSelect = el<HTMLSelectElement>("eps");
const levelsSelect = el<HTMLSelectElement>("levels");
const widthInput = el<HTMLInputElement>("width");
const allfocusToggle = el<HTMLInputElement>("allfocus");
const refreshButton = el<HTMLButtonElement>("refresh");
const banner = el<HTMLDivElement>("banner");
const inlineError = el<HTMLDivElement>("inline-error");
const image = el<HTMLImageElement>("view");
const statsPanel = el<HTMLDivElement>("stats");
const metaPanel = el<HTMLDivElement>("metadata");

let metadata: Metadata | null = null;
let objectUrl: string | null = null;

function showResult(result: RenderResult): void {
  banner.hidden = true;
  inlineError.textContent = "";
  if (objectUrl) URL.revokeObjectURL(objectUrl);
  objectUrl = URL.createObjectURL(result.blob);
  image.src = objectUrl;
  const s = result.stats;
  statsPanel.innerHTML = [
    `<dt>server time</dt><dd>${s.computeMs.toFixed(1)} ms</dd>`,
    `<dt>cache</dt><dd>${s.cache}</dd>`,
    `<dt>coefficients used</dt><dd>${s.nnzUsed.toLocaleString()}</dd>`,
    `<dt>sharpness L/R</dt><dd>${s.sharpnessLeft.toExponential(2)} / ` +
      `${s.sharpnessRight.toExponential(2)}</dd>`,
  ].join("");
}

function showError(error: Error): void {
  if (error instanceof ServiceError) {
    // 4xx: a bad control value; report inline next to the controls
    inlineError.textContent = `${error.code}: ${error.message}`;
    banner.hidden = error.status < 500;
    if (error.status >= 500) banner.textContent = error.message;
  } else {
    banner.textContent = `service unreachable: ${error.message}`;
    banner.hidden = false;
  }
}

const scheduler = new RenderScheduler(showResult, showError);

function currentUrl(): string {
  const base = baseInput.value;
  if (allfocusToggle.checked) {
    return buildAllfocusUrl(base, widthValue());
  }
  return buildRefocusUrl(base, {
    alpha: Number(alphaSlider.value),
    eps: epsSelect.value === "" ? undefined : Number(epsSelect.value),
    levels: levelsSelect.value === "" ? undefined : Number(levelsSelect.value),
    width: widthValue(),
  });
}

function widthValue(): number | undefined {
  const w = Number(widthInput.value);
  return Number.isFinite(w) && w > 0 ? w : undefined;
}

function requestRender(): void {
  scheduler.request(currentUrl());
}

function renderMetadata(meta: Metadata | null): void {
  if (!meta) {
    metaPanel.textContent = "no field loaded";
    return;
  }
  metaPanel.innerHTML = [
    `<dt>dims</dt><dd>${meta.dims.join(" x ")}</dd>`,
    `<dt>levels</dt><dd>j_max = ${meta.j_max}</dd>`,
    `<dt>coefficients</dt><dd>${meta.nnz.toLocaleString()}</dd>`,
    `<dt>compression</dt><dd>${meta.cr.toFixed(1)}x</dd>`,
    `<dt>threshold</dt><dd>${meta.eps}</dd>`,
    `<dt>depth map</dt><dd>${meta.has_depth_map ? "yes" : "no"}</dd>`,
  ].join("");
}

async function loadMetadata(): Promise<void> {
  try {
    metadata = await fetchMetadata(baseInput.value);
    renderMetadata(metadata);
    banner.hidden = true;
    const hasDepth = metadata.has_depth_map;
    allfocusToggle.disabled = !hasDepth;
    allfocusToggle.title = hasDepth
      ? "render with per-pixel focus from the depth map"
      : "unavailable: the loaded field has no depth map";
    if (!hasDepth) allfocusToggle.checked = false;
    epsSelect.innerHTML = "";
    for (const eps of epsOptions(metadata.eps)) {
      const option = document.createElement("option");
      option.value = String(eps);
      option.textContent = String(eps);
      epsSelect.appendChild(option);
    }
  } catch (error) {
    metadata = null;
    renderMetadata(null);
    showError(error as Error);
  }
}

/** Retention thresholds offered to the user, from the stored one upward. */
export function epsOptions(storedEps: number): number[] {
  const floor = Math.max(storedEps, 0.01);
  return [1, 2, 5, 10, 20].map((f) => Number((floor * f).toPrecision(3)));
}

alphaSlider.min = String(ALPHA_MIN);
alphaSlider.max = String(ALPHA_MAX);
alphaSlider.addEventListener("input", () => {
  alphaValue.textContent = Number(alphaSlider.value).toFixed(3);
  if (!allfocusToggle.checked) requestRender();
});
for (const control of [epsSelect, levelsSelect, widthInput, allfocusToggle]) {
  control.addEventListener("change", requestRender);
}
refreshButton.addEventListener("click", () => {
  void loadMetadata().then(requestRender);
});
baseInput.addEventListener("change", () => {
  scheduler.cancel();
  void loadMetadata().then(requestRender);
});

void loadMetadata().then(requestRender);
