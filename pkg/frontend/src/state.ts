/**
 * Client state: a pure function of the last service response plus a
 * pending-selection flag. No weights, particles, or server internals are
 * ever held client-side; the only persistent datum is the session id
 * inside the last response.
 */

import type { DatasetInfo, SessionView } from './types.js';

export type Screen = 'profile' | 'round' | 'result';

export interface AppState {
  screen: Screen;
  datasets: DatasetInfo[];
  selectedDataset: string | null;
  session: SessionView | null;
  /** choice index currently in flight (or awaiting retry) */
  pendingSelection: number | null;
  /** true while a request is running; inputs are disabled */
  busy: boolean;
  /** a failed submission keeps the selection so retry can resend it */
  error: string | null;
}

export type AppEvent =
  | { kind: 'datasets_loaded'; datasets: DatasetInfo[] }
  | { kind: 'dataset_selected'; id: string }
  | { kind: 'request_started'; selection?: number }
  | { kind: 'session_updated'; view: SessionView }
  | { kind: 'request_failed'; message: string }
  | { kind: 'reset' };

export function initialState(): AppState {
  return {
    screen: 'profile',
    datasets: [],
    selectedDataset: null,
    session: null,
    pendingSelection: null,
    busy: false,
    error: null,
  };
}

function screenFor(view: SessionView): Screen {
  return view.phase === 'finalized' ? 'result' : 'round';
}

export function reduce(state: AppState, event: AppEvent): AppState {
  switch (event.kind) {
    case 'datasets_loaded': {
      const selected = state.selectedDataset ?? event.datasets[0]?.id ?? null;
      return { ...state, datasets: event.datasets, selectedDataset: selected };
    }
    case 'dataset_selected':
      return { ...state, selectedDataset: event.id };
    case 'request_started':
      return {
        ...state,
        busy: true,
        error: null,
        pendingSelection: event.selection ?? state.pendingSelection,
      };
    case 'session_updated':
      return {
        ...state,
        session: event.view,
        screen: screenFor(event.view),
        busy: false,
        pendingSelection: null,
        error: null,
      };
    case 'request_failed':
      // keep pendingSelection: the retry affordance resubmits the same pair
      return { ...state, busy: false, error: event.message };
    case 'reset':
      return { ...initialState(), datasets: state.datasets,
               selectedDataset: state.selectedDataset };
  }
}

/** Blocks submissions for any round other than the one on screen. */
export function canSubmit(state: AppState, round: number): boolean {
  return (
    !state.busy &&
    state.pendingSelection === null &&
    state.session !== null &&
    state.session.phase === 'awaiting_choice' &&
    state.session.round === round
  );
}

export type Listener = (state: AppState) => void;

export class Store {
  private state: AppState = initialState();
  private listeners: Listener[] = [];

  get(): AppState {
    return this.state;
  }

  dispatch(event: AppEvent): AppState {
    this.state = reduce(this.state, event);
    for (const listener of this.listeners) listener(this.state);
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}
