/**
 * Wire types mirroring the session service's JSON payloads.
 * Only fields present in the API schema are modeled; the service never
 * sends posterior particles or weight estimates and the client has no
 * place to put them.
 */

export interface NumericFeatureSpec {
  name: string;
  kind: 'numeric';
  min: number;
  max: number;
  step: number;
}

export interface CategoricalFeatureSpec {
  name: string;
  kind: 'categorical';
  levels: string[];
}

export type FeatureSpec = NumericFeatureSpec | CategoricalFeatureSpec;

export interface DatasetInfo {
  id: string;
  features: FeatureSpec[];
  generators: string[];
  default_q: number;
  default_k: number;
}

export interface DatasetsResponse {
  schema_version: number;
  datasets: DatasetInfo[];
}

export interface ActionView {
  function: string;
  argument: number;
  feature: string;
  from: number | string;
  to: number | string;
  label: string;
  rule?: string;
}

export interface CandidateView {
  index: number;
  first_action: string;
  actions: ActionView[];
  expected_cost: number;
  achieves_recourse: boolean;
}

export interface ChoiceSetView {
  round: number;
  items: CandidateView[];
}

export interface FinalView {
  actions: ActionView[];
  success: boolean;
}

export type Phase = 'awaiting_choice' | 'finalized' | 'querying';

export interface SessionView {
  schema_version: number;
  session_id: string;
  dataset: string;
  phase: Phase;
  round: number;
  budget: number;
  set_size: number;
  choice_set?: ChoiceSetView;
  final?: FinalView;
}

export interface CreateSessionRequest {
  dataset: string;
  features: Record<string, number | string>;
  q: number;
  k: number;
  generator: string;
  seed?: number;
}
