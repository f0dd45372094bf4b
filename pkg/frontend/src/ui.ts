// DOM rendering and interaction wiring: sentence cards with suggestion
// chips, a searchable taxonomy browser for adding missed labels, a retry
// queue banner, and accept/reject/next keyboard shortcuts.

import { AnnotationApi, ApiError } from "./api.js";
import type { DecisionAction, TaxonomyTree } from "./api.js";
import { PILLAR_PALETTE, buildLabelIndex, colorFor, type LabelIndex } from "./colors.js";
import { ReviewState, type PendingDecision } from "./state.js";

export class ReviewApp {
  private state: ReviewState | null = null;
  private labelIndex: LabelIndex | null = null;
  private focusedSentence = 0;
  private focusedChip = 0;
  private retryTimer: number | null = null;

  constructor(
    private api: AnnotationApi,
    private root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    const tree: TaxonomyTree = await this.api.taxonomy();
    this.labelIndex = buildLabelIndex(tree);
    this.renderShell(tree);
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    cls?: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (cls) node.className = cls;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderShell(tree: TaxonomyTree): void {
    this.root.replaceChildren();
    const intake = this.el("section", "intake");
    const textarea = this.el("textarea");
    textarea.placeholder = "Paste interview text here...";
    textarea.rows = 6;
    const submit = this.el("button", "primary", "Suggest labels");
    submit.addEventListener("click", () => {
      void this.submit(textarea.value);
    });
    intake.append(textarea, submit);

    const status = this.el("div", "status");
    status.id = "status";
    const cards = this.el("section", "cards");
    cards.id = "cards";
    const browser = this.renderTaxonomyBrowser(tree);
    this.root.append(intake, status, cards, browser);

    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  private async submit(text: string): Promise<void> {
    if (!text.trim()) {
      this.setStatus("Nothing to annotate.", "warn");
      return;
    }
    this.setStatus("Scoring...", "info");
    try {
      const doc = await this.api.submitDocument(text);
      this.state = new ReviewState(doc);
      this.focusedSentence = 0;
      this.focusedChip = 0;
      this.renderCards();
      this.setStatus(`Document ${doc.doc_id}: ${doc.sentences.length} sentences.`, "info");
    } catch (error) {
      this.setStatus(`Submit failed: ${describe(error)}`, "error");
    }
  }

  private setStatus(message: string, kind: "info" | "warn" | "error"): void {
    const node = document.getElementById("status");
    if (node) {
      node.textContent = message;
      node.dataset.kind = kind;
    }
  }

  renderCards(): void {
    const host = document.getElementById("cards");
    if (!host || !this.state || !this.labelIndex) return;
    host.replaceChildren();
    for (const sentence of this.state.sentences) {
      const card = this.el("article", "card");
      if (sentence.idx === this.focusedSentence) card.classList.add("focused");
      card.append(this.el("p", "sentence", sentence.text));
      const chipRow = this.el("div", "chips");
      this.state.chips(sentence.idx).forEach((chip, chipPos) => {
        const node = this.el("button", `chip ${chip.state}`);
        node.style.borderColor = colorFor(this.labelIndex!, chip.label);
        const name = this.labelIndex!.nameOf.get(chip.label) ?? chip.label;
        node.textContent = chip.score === null ? name : `${name} ${chip.score.toFixed(2)}`;
        if (sentence.idx === this.focusedSentence && chipPos === this.focusedChip) {
          node.classList.add("chip-focused");
        }
        node.addEventListener("click", () => {
          this.toggleChip(sentence.idx, chip.label);
        });
        chipRow.append(node);
      });
      card.append(chipRow);
      card.addEventListener("click", () => {
        this.focusedSentence = sentence.idx;
        this.renderCards();
      });
      host.append(card);
    }
    const exportRow = this.el("div", "export-row");
    const exportBtn = this.el("button", "primary", "Export corrected gold");
    exportBtn.addEventListener("click", () => void this.download());
    exportRow.append(exportBtn);
    if (this.state.dirty) {
      const pending = this.el(
        "span",
        "pending",
        `${this.state.pending.length} unsaved decision(s) - retrying...`,
      );
      exportRow.append(pending);
    }
    host.append(exportRow);
  }

  /** Click on a chip: suggested/accepted -> reject; rejected -> accept. */
  toggleChip(idx: number, label: string): void {
    if (!this.state) return;
    const current = this.state.chipState(idx, label);
    const action: DecisionAction = current === "rejected" ? "accept" : "reject";
    this.decide(idx, label, action);
  }

  addLabel(label: string): void {
    if (!this.state) return;
    if (!this.state.canApply(this.focusedSentence, label, "add")) {
      this.setStatus(`${label} is already suggested on this sentence.`, "warn");
      return;
    }
    this.decide(this.focusedSentence, label, "add");
  }

  private decide(idx: number, label: string, action: DecisionAction): void {
    if (!this.state) return;
    let pending: PendingDecision;
    try {
      pending = this.state.apply(idx, label, action);
    } catch (error) {
      this.setStatus(describe(error), "warn");
      return;
    }
    this.renderCards();
    void this.push(pending);
  }

  private async push(pending: PendingDecision): Promise<void> {
    if (!this.state) return;
    try {
      pending.attempts += 1;
      await this.api.postDecision(this.state.docId, pending.idx, pending.label, pending.action);
      this.state.acknowledge(pending);
      this.renderCards();
    } catch (error) {
      if (error instanceof ApiError && error.status < 500) {
        // the server rejected the decision outright; drop it and resync
        this.state.acknowledge(pending);
        this.setStatus(`Server rejected decision: ${error.message}`, "error");
        this.renderCards();
        return;
      }
      this.setStatus(`Network trouble, will retry (${describe(error)})`, "warn");
      this.scheduleRetry();
    }
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.retryTimer = window.setTimeout(() => {
      this.retryTimer = null;
      const queue = this.state ? [...this.state.pending] : [];
      for (const pending of queue) void this.push(pending);
    }, 2000);
  }

  private async download(): Promise<void> {
    if (!this.state) return;
    try {
      const body = await this.api.exportGold(this.state.docId);
      const blob = new Blob([body], { type: "application/x-ndjson" });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `${this.state.docId}-gold.jsonl`;
      link.click();
      URL.revokeObjectURL(link.href);
    } catch (error) {
      this.setStatus(`Export failed: ${describe(error)}`, "error");
    }
  }

  private renderTaxonomyBrowser(tree: TaxonomyTree): HTMLElement {
    const browser = this.el("aside", "taxonomy");
    browser.append(this.el("h2", undefined, "Taxonomy"));
    const search = this.el("input");
    search.type = "search";
    search.placeholder = "Search values to add...";
    const list = this.el("div", "taxonomy-list");
    const render = (query: string) => {
      list.replaceChildren();
      const needle = query.trim().toLowerCase();
      tree.t1.forEach((pillar, i) => {
        const color = PILLAR_PALETTE[i % PILLAR_PALETTE.length];
        for (const group of pillar.t2) {
          for (const leaf of group.t3) {
            if (!leaf.trained) continue;
            const haystack = `${leaf.name} ${leaf.description}`.toLowerCase();
            if (needle && !haystack.includes(needle)) continue;
            const row = this.el("button", "tax-row");
            row.style.borderLeftColor = color;
            row.textContent = `${leaf.name} - ${group.name}`;
            row.title = leaf.description;
            row.addEventListener("click", () => this.addLabel(leaf.id));
            list.append(row);
          }
        }
      });
    };
    search.addEventListener("input", () => render(search.value));
    render("");
    browser.append(search, list);
    return browser;
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.state) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "TEXTAREA" || target.tagName === "INPUT")) return;
    const chips = this.state.chips(this.focusedSentence);
    switch (event.key) {
      case "j":
        this.focusedSentence = Math.min(this.focusedSentence + 1, this.state.sentences.length - 1);
        this.focusedChip = 0;
        break;
      case "k":
        this.focusedSentence = Math.max(this.focusedSentence - 1, 0);
        this.focusedChip = 0;
        break;
      case "n":
        this.focusedChip = chips.length ? (this.focusedChip + 1) % chips.length : 0;
        break;
      case "a":
        if (chips[this.focusedChip]) {
          this.decide(this.focusedSentence, chips[this.focusedChip].label, "accept");
          return;
        }
        break;
      case "r":
      case "x":
        if (chips[this.focusedChip]) {
          this.decide(this.focusedSentence, chips[this.focusedChip].label, "reject");
          return;
        }
        break;
      default:
        return;
    }
    this.renderCards();
  }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
