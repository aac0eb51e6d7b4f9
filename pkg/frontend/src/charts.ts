// Client-side chart rendering straight from the structured spec.

import type { ChartSpec, Series, TreeNodeSpec } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";
const COLORS = ["#2563eb", "#9333ea", "#059669", "#d97706"];

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) el.setAttribute(key, String(value));
  return el;
}

function scale(v: number, lo: number, hi: number, outLo: number, outHi: number): number {
  const span = hi - lo || 1;
  return outLo + ((v - lo) / span) * (outHi - outLo);
}

function titleText(svg: SVGSVGElement, title: string, width: number): void {
  const t = svgEl("text", { x: width / 2, y: 16, "text-anchor": "middle", "font-size": 12, "font-weight": "bold" });
  t.textContent = title;
  svg.appendChild(t);
}

function renderBar(chart: ChartSpec): SVGSVGElement {
  const width = 460;
  const height = 240;
  const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}` });
  titleText(svg, chart.title, width);
  const s = chart.series?.[0];
  if (!s) return svg;
  const top = 28;
  const bottom = height - 36;
  const left = 44;
  const yMax = Math.max(...s.y, 0) || 1;
  const slot = (width - left - 16) / Math.max(s.y.length, 1);
  s.y.forEach((v, i) => {
    const barH = (v / yMax) * (bottom - top);
    const x = left + i * slot + slot * 0.15;
    svg.appendChild(svgEl("rect", { x, y: bottom - barH, width: slot * 0.7, height: barH, fill: COLORS[0] }));
    const label = svgEl("text", { x: x + slot * 0.35, y: bottom + 13, "text-anchor": "middle", "font-size": 10 });
    label.textContent = String(s.x[i]);
    svg.appendChild(label);
  });
  svg.appendChild(svgEl("line", { x1: left, y1: bottom, x2: width - 16, y2: bottom, stroke: "#555" }));
  return svg;
}

function seriesPoints(s: Series): { xs: number[]; ys: number[] } {
  const xs = s.x.map((v, i) => (typeof v === "number" ? v : i));
  return { xs, ys: s.y };
}

function renderLine(chart: ChartSpec): SVGSVGElement {
  const width = 460;
  const height = 240;
  const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}` });
  titleText(svg, chart.title, width);
  const series = chart.series ?? [];
  if (!series.length) return svg;
  const top = 28;
  const bottom = height - 30;
  const left = 44;
  const right = width - 16;
  const allX: number[] = [];
  const allY: number[] = [];
  for (const s of series) {
    const { xs, ys } = seriesPoints(s);
    allX.push(...xs);
    allY.push(...ys);
    (s.y_error ?? []).forEach((e, i) => allY.push(ys[i] - e, ys[i] + e));
  }
  const [xLo, xHi] = [Math.min(...allX), Math.max(...allX)];
  const [yLo, yHi] = [Math.min(...allY, 0), Math.max(...allY)];
  svg.appendChild(svgEl("line", { x1: left, y1: bottom, x2: right, y2: bottom, stroke: "#555" }));
  svg.appendChild(svgEl("line", { x1: left, y1: top, x2: left, y2: bottom, stroke: "#555" }));
  series.forEach((s, si) => {
    const color = COLORS[si % COLORS.length];
    const { xs, ys } = seriesPoints(s);
    const px = xs.map((v) => scale(v, xLo, xHi, left, right));
    const py = ys.map((v) => scale(v, yLo, yHi, bottom, top));
    if (s.y_error) {
      // shaded band around the line
      const upper = ys.map((v, i) => scale(v + (s.y_error![i] ?? 0), yLo, yHi, bottom, top));
      const lower = ys.map((v, i) => scale(v - (s.y_error![i] ?? 0), yLo, yHi, bottom, top));
      const ring = [...px.map((x, i) => `${x},${upper[i]}`), ...px.map((x, i) => `${x},${lower[i]}`).reverse()];
      const band = svgEl("polygon", { points: ring.join(" "), fill: color, opacity: 0.15 });
      band.classList.add("error-band");
      svg.appendChild(band);
    }
    svg.appendChild(
      svgEl("polyline", { points: px.map((x, i) => `${x},${py[i]}`).join(" "), fill: "none", stroke: color, "stroke-width": 2 }),
    );
    px.forEach((x, i) => svg.appendChild(svgEl("circle", { cx: x, cy: py[i], r: 3, fill: color })));
    const legend = svgEl("text", { x: right - 4, y: top + 12 * si + 10, "text-anchor": "end", "font-size": 10, fill: color });
    legend.textContent = s.label;
    svg.appendChild(legend);
  });
  return svg;
}

function renderTreeNode(node: TreeNodeSpec): HTMLElement {
  if (!node.children.length) {
    const leaf = document.createElement("div");
    leaf.className = "tree-leaf";
    if (node.edge) leaf.dataset.edge = node.edge;
    leaf.textContent = (node.edge ? `${node.edge}: ` : "") + node.label;
    return leaf;
  }
  const details = document.createElement("details");
  details.className = "tree-node";
  details.open = true;
  if (node.edge) details.dataset.edge = node.edge;
  const summary = document.createElement("summary");
  summary.textContent = (node.edge ? `${node.edge}: ` : "") + node.label;
  details.appendChild(summary);
  for (const child of node.children) details.appendChild(renderTreeNode(child));
  return details;
}

export function renderChart(chart: ChartSpec): HTMLElement {
  const wrap = document.createElement("figure");
  wrap.className = `chart chart-${chart.kind}`;
  if (chart.kind === "bar") wrap.appendChild(renderBar(chart));
  else if (chart.kind === "line") wrap.appendChild(renderLine(chart));
  else if (chart.kind === "tree" && chart.tree) {
    const caption = document.createElement("figcaption");
    caption.textContent = chart.title;
    wrap.appendChild(caption);
    wrap.appendChild(renderTreeNode(chart.tree));
  }
  return wrap;
}
