import type { CampaignView } from "./view.js";
import { bandPath, linePath, linearScale, niceDomain } from "./view.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const W = 720;
const H = 300;
const PAD = { left: 46, right: 14, top: 12, bottom: 26 };

function el<K extends string>(name: K, attrs: Record<string, string | number>): Element {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, String(v));
  }
  return node;
}

function axis(svg: Element, sx: ReturnType<typeof linearScale>, sy: ReturnType<typeof linearScale>) {
  const [y0, y1] = sy.domain;
  for (const t of [0, 0.25, 0.5, 0.75, 1]) {
    const x = sx(t);
    svg.appendChild(el("line", { x1: x, x2: x, y1: sy(y0), y2: sy(y0) + 4, stroke: "#888" }));
    const label = el("text", { x, y: sy(y0) + 16, "text-anchor": "middle", "font-size": 10, fill: "#555" });
    label.textContent = t.toFixed(2);
    svg.appendChild(label);
  }
  for (const t of [y0, (y0 + y1) / 2, y1]) {
    const label = el("text", { x: PAD.left - 6, y: sy(t) + 3, "text-anchor": "end", "font-size": 10, fill: "#555" });
    label.textContent = t.toPrecision(3);
    svg.appendChild(label);
  }
}

/** Render the 1-D prediction panel: band, mean, shading, markers, proposal. */
export function renderPredictionPanel(view: CampaignView): Element {
  const svg = el("svg", { width: W, height: H, viewBox: `0 0 ${W} ${H}`, class: "panel" });
  const xs = view.grid.map((pt) => pt[0]!);
  const yVals = [...view.bandLow, ...view.bandHigh, ...view.markers.map((m) => m.value)];
  if (view.summary.c !== null) yVals.push(view.summary.c);
  const sx = linearScale([0, 1], [PAD.left, W - PAD.right]);
  const sy = linearScale(niceDomain(yVals), [H - PAD.bottom, PAD.top]);

  for (const seg of view.shading) {
    svg.appendChild(el("rect", {
      x: sx(seg.from), width: Math.max(sx(seg.to) - sx(seg.from), 1),
      y: PAD.top, height: H - PAD.top - PAD.bottom,
      fill: "#d9453233", class: "censored-region",
    }));
  }
  svg.appendChild(el("path", {
    d: bandPath(xs, view.bandLow, view.bandHigh, sx, sy),
    fill: "#4a90d933", stroke: "none", class: "band",
  }));
  svg.appendChild(el("path", {
    d: linePath(xs, view.mean, sx, sy),
    fill: "none", stroke: "#2a6fb0", "stroke-width": 1.6, class: "mean",
  }));
  if (view.summary.c !== null) {
    const yc = sy(view.summary.c);
    svg.appendChild(el("line", {
      x1: PAD.left, x2: W - PAD.right, y1: yc, y2: yc,
      stroke: "#d94532", "stroke-dasharray": "6 3", class: "limit",
    }));
  }
  for (const m of view.markers) {
    const x = sx(m.x[0]!);
    const y = sy(m.value);
    if (m.censored) {
      // vertical-limit glyph: the response escaped upward at the limit
      svg.appendChild(el("line", {
        x1: x, x2: x, y1: y, y2: y - 16,
        stroke: "#d94532", "stroke-width": 2, class: "marker censored",
      }));
      svg.appendChild(el("path", {
        d: `M${x - 4},${y - 12} L${x},${y - 17} L${x + 4},${y - 12}`,
        fill: "none", stroke: "#d94532", "stroke-width": 2, class: "marker censored",
      }));
    } else {
      const cls = m.fidelity === "computer" ? "marker computer" : "marker observed";
      const color = m.fidelity === "computer" ? "#777" : "#111";
      svg.appendChild(el("path", {
        d: `M${x - 4},${y - 4} L${x + 4},${y + 4} M${x - 4},${y + 4} L${x + 4},${y - 4}`,
        stroke: color, "stroke-width": 1.6, class: cls,
      }));
    }
  }
  if (view.proposal) {
    const x = sx(view.proposal.x_next[0]!);
    svg.appendChild(el("line", {
      x1: x, x2: x, y1: PAD.top, y2: H - PAD.bottom,
      stroke: "#2c8a3d", "stroke-width": 1.4, "stroke-dasharray": "4 3",
      class: "proposal",
    }));
  }
  axis(svg, sx, sy);
  return svg;
}

/** Render the criterion curve over the same grid, with the proposal marker. */
export function renderCriterionPanel(view: CampaignView): Element {
  const svg = el("svg", { width: W, height: 180, viewBox: `0 0 ${W} 180`, class: "panel criterion" });
  const xs = view.grid.map((pt) => pt[0]!);
  const finite = view.criterion.filter((v) => Number.isFinite(v));
  const sx = linearScale([0, 1], [PAD.left, W - PAD.right]);
  const sy = linearScale(niceDomain(finite), [180 - PAD.bottom, PAD.top]);
  svg.appendChild(el("path", {
    d: linePath(xs, view.criterion.map((v) => (Number.isFinite(v) ? v : sy.domain[1])), sx, sy),
    fill: "none", stroke: "#b07a2a", "stroke-width": 1.5, class: "criterion-line",
  }));
  if (view.proposal) {
    const x = sx(view.proposal.x_next[0]!);
    svg.appendChild(el("line", {
      x1: x, x2: x, y1: PAD.top, y2: 180 - PAD.bottom,
      stroke: "#2c8a3d", "stroke-width": 1.4, "stroke-dasharray": "4 3", class: "proposal",
    }));
  }
  axis(svg, sx, sy);
  return svg;
}

export function renderSummary(view: CampaignView): HTMLElement {
  const div = document.createElement("div");
  div.className = "summary";
  const c = view.summary.c;
  div.textContent =
    `campaign ${view.summary.id.slice(0, 8)} | p=${view.summary.p} | ` +
    `limit ${c === null ? "none" : c} | ` +
    `${view.summary.observedCount} observed, ${view.summary.censoredCount} censored | ` +
    `status ${view.summary.status}`;
  if (view.highCensoringRisk) {
    const warn = document.createElement("span");
    warn.className = "risk-banner";
    warn.textContent = " high censoring risk everywhere";
    div.appendChild(warn);
  }
  return div;
}
