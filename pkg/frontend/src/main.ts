import { ApiClient, OfflineQueue, renderGrid, ServiceError, sliceGrid } from "./api.js";
import type { CampaignDoc, Proposal } from "./types.js";
import { assembleView } from "./view.js";
import { renderCriterionPanel, renderPredictionPanel, renderSummary } from "./render.js";

const client = new ApiClient("");
const queue = new OfflineQueue();

interface UiState {
  campaignId: string | null;
  doc: CampaignDoc | null;
  proposal: Proposal | null;
  inFlight: boolean; // at most one mutation at a time
  lastSeq: number;
}

const state: UiState & { sliceAxis: number } = {
  campaignId: null,
  doc: null,
  proposal: null,
  inFlight: false,
  lastSeq: -1,
  sliceAxis: 0,
};

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function banner(message: string, kind: "info" | "error" = "info") {
  const node = $("banner");
  node.textContent = message;
  node.className = `banner ${kind}`;
  node.style.display = message ? "block" : "none";
}

async function refresh(force = false): Promise<void> {
  if (!state.campaignId) return;
  let doc: CampaignDoc;
  try {
    doc = await client.getCampaign(state.campaignId);
    if (queue.length > 0) {
      const replayed = await queue.replay(client);
      if (replayed > 0) {
        banner(`reconnected: replayed ${replayed} queued observation(s)`);
        doc = await client.getCampaign(state.campaignId);
      }
    }
  } catch (err) {
    if (!(err instanceof ServiceError)) {
      banner("service unreachable, retrying...", "error");
      return;
    }
    throw err;
  }
  const seq = (doc as unknown as { event_seq: number }).event_seq ?? 0;
  if (!force && seq === state.lastSeq) return; // nothing changed
  state.lastSeq = seq;
  state.doc = doc;

  if (doc.status === "ReadyToPropose" || doc.pending_proposal) {
    try {
      state.proposal = await client.getProposal(doc.id);
    } catch {
      state.proposal = doc.pending_proposal;
    }
  } else {
    state.proposal = doc.pending_proposal;
  }

  if (doc.model_snapshot) {
    const p = doc.config.p;
    // p > 2 renders a 1-D conditional slice along a chosen axis with the
    // remaining coordinates fixed (anchored at the proposal when present)
    const anchor: number[] = state.proposal?.x_next ?? Array(p).fill(0.5);
    const effGrid = p <= 2 ? renderGrid(p) : sliceGrid(p, state.sliceAxis % p, anchor);
    const [predictions, criterion] = await Promise.all([
      client.getPredictions(doc.id, effGrid),
      client.getCriterion(doc.id, effGrid),
    ]);
    const view = assembleView(doc, predictions, criterion, effGrid, state.proposal);
    const panels = $("panels");
    panels.replaceChildren(renderSummary(view));
    if (p === 1) {
      panels.appendChild(renderPredictionPanel(view));
      panels.appendChild(renderCriterionPanel(view));
    } else if (p > 2) {
      const picker = document.createElement("div");
      picker.className = "summary";
      const select = document.createElement("select");
      for (let a = 0; a < p; a++) {
        const opt = document.createElement("option");
        opt.value = String(a);
        opt.textContent = `slice along x${a + 1}`;
        if (a === state.sliceAxis % p) opt.selected = true;
        select.appendChild(opt);
      }
      select.addEventListener("change", () => {
        state.sliceAxis = Number(select.value);
        void refresh(true);
      });
      picker.append("view: ", select,
        ` (other coordinates fixed at ${anchor.map((v) => v.toFixed(2)).join(", ")})`);
      panels.appendChild(picker);
      // the slice is one-dimensional: reuse the 1-D panels over the axis
      const slice1d = view.grid.map((pt) => [pt[state.sliceAxis % p]!] as number[]);
      panels.appendChild(renderPredictionPanel({ ...view, grid: slice1d, markers: [] }));
      panels.appendChild(renderCriterionPanel({ ...view, grid: slice1d }));
    } else {
      const note = document.createElement("div");
      note.textContent = "2-D heatmap rendering: mean surface values are listed in the console";
      panels.appendChild(note);
    }
  } else {
    $("panels").replaceChildren(renderSummary({
      summary: {
        id: doc.id, p: doc.config.p, c: doc.config.c, status: doc.status,
        observedCount: doc.observations.filter((o) => !o.censored).length,
        censoredCount: doc.observations.filter((o) => o.censored).length,
      },
      grid: [], mean: [], bandLow: [], bandHigh: [], lambda: [], shading: [],
      criterion: [], markers: [], proposal: state.proposal,
      highCensoringRisk: false,
    }));
  }
  updateForm();
}

function updateForm(): void {
  const xInput = $("obs-x") as HTMLInputElement;
  const valueInput = $("obs-value") as HTMLInputElement;
  const censoredBox = $("obs-censored") as HTMLInputElement;
  const submit = $("obs-submit") as HTMLButtonElement;
  const proposal = state.proposal;
  if (proposal) {
    xInput.value = proposal.x_next.map((v) => v.toFixed(6)).join(", ");
  }
  const c = state.doc?.config.c ?? null;
  if (censoredBox.checked && c !== null) {
    valueInput.value = String(c); // censored readings are stored at the limit
    valueInput.disabled = true;
  } else {
    valueInput.disabled = false;
  }
  submit.disabled = state.inFlight || !state.campaignId || !proposal;
}

async function submitObservation(): Promise<void> {
  if (state.inFlight || !state.campaignId || !state.proposal) return;
  const valueInput = $("obs-value") as HTMLInputElement;
  const censoredBox = $("obs-censored") as HTMLInputElement;
  state.inFlight = true;
  updateForm();
  banner("submitting, waiting for refit...");
  try {
    const result = await queue.submit(client, state.campaignId, {
      x: state.proposal.x_next,
      value: censoredBox.checked ? null : Number(valueInput.value),
      censored: censoredBox.checked,
      seq_token: `ui-${state.lastSeq}-${state.proposal.x_next.join(",")}`,
    });
    if (result.queued) {
      banner("offline: observation queued, will replay on reconnect", "error");
    } else {
      banner("");
      censoredBox.checked = false;
      await refresh(true);
    }
  } catch (err) {
    if (err instanceof ServiceError) {
      banner(`${err.body.code}: ${err.body.message}${err.body.field ? ` (${err.body.field})` : ""}`, "error");
    } else {
      banner(String(err), "error");
    }
  } finally {
    state.inFlight = false;
    updateForm();
  }
}

async function createCampaign(): Promise<void> {
  const p = Number(($("new-p") as HTMLInputElement).value) || 1;
  const cRaw = ($("new-c") as HTMLInputElement).value.trim();
  const doc = await client.createCampaign({
    p,
    n_ini: Number(($("new-nini") as HTMLInputElement).value) || 6,
    n_seq: Number(($("new-nseq") as HTMLInputElement).value) || 20,
    c: cRaw === "" ? null : Number(cRaw),
    bifidelity: false,
    method: "icmse",
    restarts: 8,
    seed: Math.floor(Math.random() * 2 ** 31),
  });
  window.location.hash = `#/c/${doc.id}`;
}

function bootFromHash(): void {
  const match = window.location.hash.match(/^#\/c\/([0-9a-f]+)$/);
  state.campaignId = match ? match[1]! : null;
  state.lastSeq = -1;
  void refresh(true);
}

export function boot(): void {
  $("obs-submit").addEventListener("click", () => void submitObservation());
  $("obs-censored").addEventListener("change", updateForm);
  $("new-create").addEventListener("click", () => void createCampaign());
  window.addEventListener("hashchange", bootFromHash);
  window.addEventListener("online", () => void refresh(true));
  bootFromHash();
  setInterval(() => void refresh(), 2500);
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
}
