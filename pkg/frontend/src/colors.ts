// Chip colours derive from the label's T1 pillar: six stable colour groups.

import type { TaxonomyTree } from "./api.js";

export const PILLAR_PALETTE = [
  "#c0392b",
  "#2980b9",
  "#27ae60",
  "#8e44ad",
  "#d68910",
  "#16a085",
] as const;

export type LabelIndex = {
  pillarOf: Map<string, string>;
  colorOf: Map<string, string>;
  nameOf: Map<string, string>;
};

export function buildLabelIndex(tree: TaxonomyTree): LabelIndex {
  const pillarOf = new Map<string, string>();
  const colorOf = new Map<string, string>();
  const nameOf = new Map<string, string>();
  tree.t1.forEach((pillar, i) => {
    const color = PILLAR_PALETTE[i % PILLAR_PALETTE.length];
    for (const group of pillar.t2) {
      for (const leaf of group.t3) {
        pillarOf.set(leaf.id, pillar.id);
        colorOf.set(leaf.id, color);
        nameOf.set(leaf.id, leaf.name);
      }
    }
  });
  return { pillarOf, colorOf, nameOf };
}

export function colorFor(index: LabelIndex, label: string): string {
  return index.colorOf.get(label) ?? "#555555";
}
