/**
 * DTOs mirroring the adjudication service's JSON bodies.
 *
 * Field names match the wire format exactly; nothing here is invented
 * client-side.
 */

export interface Prediction {
  party_id: string;
  confidence: number;
  margin: number;
  top_k: [string, number][];
}

export interface ReviewTask {
  task_id: string;
  slip_id: string;
  evm_id: string;
  image_path: string;
  prediction: Prediction;
  state: "PENDING" | "CLAIMED" | "DECIDED";
  claimed_by: string | null;
  claimed_at: string | null;
  decision: string | null;
}

export interface QueueEntry {
  slip_id: string;
  prediction: Prediction;
}

export interface TallySheetDoc {
  evm_id: string;
  confidence_threshold: number;
  total_slips: number;
  auto_counts: Record<string, number>;
  adjudicated_counts: Record<string, number>;
  rejected: number;
  review_queue: QueueEntry[];
  decided: string[];
}

export interface TallyView {
  evms: TallySheetDoc[];
  pending_tasks: number;
}

export interface ReconciliationDoc {
  evm_id: string;
  status: "MATCH" | "MISMATCH";
  evm_counts: Record<string, number>;
  vvpat_counts: Record<string, number>;
  deltas: Record<string, number>;
  final_counts: Record<string, number>;
}

export interface ReconciliationView {
  reconciliations: ReconciliationDoc[];
}

export interface AnomalyWindowDoc {
  window_start: string;
  window_end: string;
  slip_count: number;
}

export interface AnomalyView {
  evms: Record<string, AnomalyWindowDoc[]>;
}

export interface PartyInfo {
  party_id: string;
  party_name: string;
}

/** A human decision: a concrete party or an explicit reject. */
export type Decision =
  | { kind: "party"; partyId: string }
  | { kind: "reject" };

export const REJECTED = "REJECTED";

export function decisionWire(d: Decision): string {
  return d.kind === "reject" ? REJECTED : d.partyId;
}
