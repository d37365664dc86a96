import init, { Lab } from "./pkg/psfield_web.js";

const $ = (id) => document.getElementById(id);

function paint(canvas, size, rgba) {
  canvas.width = size;
  canvas.height = size;
  const image = new ImageData(new Uint8ClampedArray(rgba), size, size);
  canvas.getContext("2d").putImageData(image, 0, 0);
}

await init();
const lab = new Lab(64, 20, 7);
const size = lab.resolution();
$("status").textContent = `${size}×${size} sphere, ${lab.light_count()} lights`;

function relight() {
  const x = Number($("lx").value);
  const y = Number($("ly").value);
  const z = Math.sqrt(Math.max(1 - x * x - y * y, 0.01));
  paint($("relight"), size, lab.relight(x, y, z));
}

function solve() {
  const p = lab.woodham();
  paint($("woodham"), size, p.rgba);
  $("woodham-out").textContent = `normal MAE ${p.mae.toFixed(3)}°`;
}

function gbr() {
  try {
    const p = lab.gbr(Number($("mu").value), Number($("nu").value), Number($("lambda").value));
    paint($("gbr"), size, p.rgba);
    $("gbr-out").textContent =
      `pseudo-normal MAE ${p.mae.toFixed(2)}°, image difference ${p.max_abs_diff.toExponential(1)}`;
  } catch (e) {
    $("gbr-out").textContent = String(e);
  }
}

for (const id of ["lx", "ly"]) $(id).addEventListener("input", relight);
for (const id of ["mu", "nu", "lambda"]) $(id).addEventListener("input", gbr);
$("solve").addEventListener("click", solve);
relight();
gbr();
