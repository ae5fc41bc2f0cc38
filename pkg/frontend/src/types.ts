/** Wire types of the prediction service. */

export type Stream = "f0" | "energy" | "duration";

export const STREAMS: Stream[] = ["f0", "energy", "duration"];

export interface DrivingValue {
  position: number;
  stream: Stream;
  value: number; // normalised units on the wire
}

export interface PredictRequest {
  sentence_id: string;
  target_speaker: number;
  style_id: number;
  driving: DrivingValue[];
}

export interface PredictResponse {
  paf_normalized: number[][];
  paf_denormalized: number[][];
  attention_weights: number[];
  latent_mu_norm: number;
  model_fingerprint: string;
}

export interface SentenceSummary {
  sentence_id: string;
  length: number;
  style_id: number;
  split: string;
  rendition_actors: number[];
}

export interface RenditionPayload {
  actor_id: number;
  paf_normalized: number[][];
  paf_denormalized: number[][];
}

export interface SentenceDetail {
  sentence_id: string;
  length: number;
  phone_ids: number[];
  style_id: number;
  split: string;
  renditions: RenditionPayload[];
}

export interface StreamStats {
  mean: number;
  std: number;
}

export interface SpeakerInfo {
  id: number;
  stats: Record<Stream, StreamStats>;
}

export interface HealthInfo {
  fingerprint: string;
  family: string;
  uptime_seconds: number;
}
