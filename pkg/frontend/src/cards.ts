/** Case cards and the review queue for low-confidence diagnoses. */

import type { DiagnosisResponse, RankedLabel } from "./types.js";

/** One submitted case, frozen as the service reported it. */
export interface CaseCard {
  caseId: string;
  /* Same objects, same order, as the response's ranked_labels. */
  ranking: RankedLabel[];
  cscore: number | null;
  reliable: boolean | null;
  theta: number | null;
  generation: number;
}

export function makeCaseCard(caseId: string, resp: DiagnosisResponse): CaseCard {
  return {
    caseId,
    ranking: resp.ranked_labels.slice(),
    cscore: resp.cscore,
    reliable: resp.reliable,
    theta: resp.theta,
    generation: resp.generation,
  };
}

export type ReviewDecision = "confirm" | "relabel" | "defer";

export interface ReviewQueueEntry {
  card: CaseCard;
  decision: ReviewDecision | null;
  /* Set only when decision is "relabel". */
  newLabel: string | null;
}

/** Holds cases flagged unreliable until a reviewer decides each one. */
export class ReviewQueue {
  private entries = new Map<string, ReviewQueueEntry>();
  private log: ReviewQueueEntry[] = [];

  /** Admit a card only when the service flagged it; returns whether it entered. */
  add(card: CaseCard): boolean {
    if (card.reliable !== false) {
      return false;
    }
    if (this.entries.has(card.caseId)) {
      throw new Error(`case ${card.caseId} already queued`);
    }
    this.entries.set(card.caseId, { card, decision: null, newLabel: null });
    return true;
  }

  /** Resolve a queued case; relabel requires the replacement label. */
  decide(caseId: string, decision: ReviewDecision, newLabel?: string): ReviewQueueEntry {
    const entry = this.entries.get(caseId);
    if (entry === undefined) {
      throw new Error(`case ${caseId} is not queued`);
    }
    if (decision === "relabel" && !newLabel) {
      throw new Error("relabel needs a replacement label");
    }
    entry.decision = decision;
    entry.newLabel = decision === "relabel" ? (newLabel as string) : null;
    this.entries.delete(caseId);
    this.log.push(entry);
    return entry;
  }

  pending(): ReviewQueueEntry[] {
    return [...this.entries.values()];
  }

  /** Every case that left the queue, each with its decision. */
  decided(): ReviewQueueEntry[] {
    return this.log.slice();
  }

  get size(): number {
    return this.entries.size;
  }
}
