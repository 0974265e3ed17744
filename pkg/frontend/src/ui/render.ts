/**
 * Screen renderers. Each renderer is a pure function of the app state;
 * the shell clears the mount point and re-renders on every store change.
 */

import type { AppState } from '../state.js';
import type { CandidateView, DatasetInfo, FeatureSpec } from '../types.js';
import { validateFeature } from '../validate.js';

export interface Handlers {
  onDatasetChange(id: string): void;
  onProfileSubmit(values: Record<string, string>, q: number, k: number,
                  generator: string): void;
  onChoice(round: number, index: number): void;
  onRetry(): void;
  onRestart(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fieldInput(spec: FeatureSpec): HTMLElement {
  const wrap = el('div', 'field');
  const label = el('label', 'field-label', spec.name.replace(/_/g, ' '));
  label.htmlFor = `feature-${spec.name}`;
  wrap.appendChild(label);
  if (spec.kind === 'categorical') {
    const select = el('select', 'field-input');
    select.id = `feature-${spec.name}`;
    select.name = spec.name;
    for (const level of spec.levels) {
      const option = el('option', undefined, level);
      option.value = level;
      select.appendChild(option);
    }
    wrap.appendChild(select);
  } else {
    const input = el('input', 'field-input');
    input.id = `feature-${spec.name}`;
    input.name = spec.name;
    input.type = 'number';
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = String(spec.step);
    input.value = String(spec.min);
    wrap.appendChild(input);
    const hint = el('div', 'field-hint',
                    `${spec.min} to ${spec.max}, step ${spec.step}`);
    wrap.appendChild(hint);
  }
  const error = el('div', 'field-error');
  error.dataset.feature = spec.name;
  wrap.appendChild(error);
  return wrap;
}

export function renderProfile(root: HTMLElement, state: AppState,
                              handlers: Handlers): void {
  const dataset = state.datasets.find((d) => d.id === state.selectedDataset);
  const panel = el('section', 'panel profile-panel');
  panel.appendChild(el('h1', undefined, 'Your profile'));
  panel.appendChild(el('p', 'muted',
    'Describe your current situation. Each round you will pick the plan '
    + 'that feels easiest for you; answers tune the final recommendation.'));

  const datasetRow = el('div', 'field');
  const datasetLabel = el('label', 'field-label', 'scenario');
  datasetLabel.htmlFor = 'dataset-select';
  const datasetSelect = el('select', 'field-input');
  datasetSelect.id = 'dataset-select';
  for (const d of state.datasets) {
    const option = el('option', undefined, d.id);
    option.value = d.id;
    option.selected = d.id === state.selectedDataset;
    datasetSelect.appendChild(option);
  }
  datasetSelect.addEventListener('change', () =>
    handlers.onDatasetChange(datasetSelect.value));
  datasetRow.appendChild(datasetLabel);
  datasetRow.appendChild(datasetSelect);
  panel.appendChild(datasetRow);

  if (!dataset) {
    panel.appendChild(el('p', 'muted', 'Loading scenarios…'));
    root.replaceChildren(panel);
    return;
  }

  const form = el('form', 'profile-form');
  form.id = 'profile-form';
  for (const spec of dataset.features) {
    form.appendChild(fieldInput(spec));
  }

  const controls = el('div', 'session-controls');
  controls.appendChild(sessionControl('questions', 'q-input', dataset.default_q, 0, 10));
  controls.appendChild(sessionControl('options per question', 'k-input',
                                      dataset.default_k, 1, 6));
  const generatorWrap = el('div', 'field');
  const generatorLabel = el('label', 'field-label', 'planner');
  generatorLabel.htmlFor = 'generator-select';
  const generatorSelect = el('select', 'field-input');
  generatorSelect.id = 'generator-select';
  for (const name of dataset.generators) {
    const option = el('option', undefined, name);
    option.value = name;
    generatorSelect.appendChild(option);
  }
  generatorWrap.appendChild(generatorLabel);
  generatorWrap.appendChild(generatorSelect);
  controls.appendChild(generatorWrap);
  form.appendChild(controls);

  const submit = el('button', 'primary', 'Start session');
  submit.type = 'submit';
  submit.disabled = state.busy;
  form.appendChild(submit);

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const values: Record<string, string> = {};
    let firstError: string | null = null;
    for (const spec of dataset.features) {
      const input = form.querySelector<HTMLInputElement | HTMLSelectElement>(
        `[name="${spec.name}"]`);
      const raw = input ? input.value : '';
      values[spec.name] = raw;
      const slot = form.querySelector<HTMLElement>(
        `.field-error[data-feature="${spec.name}"]`);
      const error = validateFeature(spec, raw);
      if (slot) slot.textContent = error ? error.message : '';
      if (error && firstError === null) firstError = spec.name;
    }
    if (firstError !== null) return; // inline errors shown, no request sent
    const q = Number((form.querySelector('#q-input') as HTMLInputElement).value);
    const k = Number((form.querySelector('#k-input') as HTMLInputElement).value);
    handlers.onProfileSubmit(values, q, k, generatorSelect.value);
  });

  panel.appendChild(form);
  if (state.error) panel.appendChild(errorBox(state, handlers));
  root.replaceChildren(panel);
}

function sessionControl(label: string, id: string, value: number,
                        min: number, max: number): HTMLElement {
  const wrap = el('div', 'field');
  const labelEl = el('label', 'field-label', label);
  labelEl.htmlFor = id;
  const input = el('input', 'field-input');
  input.id = id;
  input.type = 'number';
  input.min = String(min);
  input.max = String(max);
  input.value = String(value);
  wrap.appendChild(labelEl);
  wrap.appendChild(input);
  return wrap;
}

function costBars(items: CandidateView[]): Map<number, number> {
  const max = Math.max(...items.map((c) => c.expected_cost), 1e-9);
  return new Map(items.map((c) => [c.index, Math.max(0.04, c.expected_cost / max)]));
}

function candidateCard(candidate: CandidateView, relative: number,
                       disabled: boolean, pending: boolean,
                       onPick: () => void): HTMLElement {
  const card = el('article', 'card candidate-card');
  card.dataset.index = String(candidate.index);
  if (pending) card.classList.add('pending');

  const list = el('ol', 'action-list');
  for (const action of candidate.actions) {
    const item = el('li', 'action-item');
    item.appendChild(el('span', 'action-label', action.label));
    if (action.rule) {
      const details = el('details', 'action-rule');
      details.appendChild(el('summary', undefined, 'why this step'));
      details.appendChild(el('code', undefined, action.rule));
      item.appendChild(details);
    }
    list.appendChild(item);
  }
  card.appendChild(list);

  // costs are abstract effort units: show a relative bar, not a number
  const bar = el('div', 'cost-bar');
  const fill = el('div', 'cost-bar-fill');
  fill.style.width = `${Math.round(relative * 100)}%`;
  bar.appendChild(fill);
  bar.title = 'relative estimated effort';
  card.appendChild(el('div', 'muted small', 'estimated effort'));
  card.appendChild(bar);
  if (!candidate.achieves_recourse) {
    card.appendChild(el('div', 'warning small',
                        'may not fully overturn the decision'));
  }

  const pick = el('button', 'primary pick-button',
                  pending ? 'Submitting…' : 'This one');
  pick.disabled = disabled;
  pick.addEventListener('click', onPick);
  card.appendChild(pick);
  return card;
}

export function renderRound(root: HTMLElement, state: AppState,
                            handlers: Handlers): void {
  const session = state.session;
  if (!session || !session.choice_set) return;
  const set = session.choice_set;
  const panel = el('section', 'panel round-panel');
  panel.appendChild(el('h1', undefined,
                       `Question ${session.round + 1} of ${session.budget}`));
  panel.appendChild(el('p', 'muted',
    'Which of these plans would be easiest for you to follow?'));

  const progress = el('div', 'progress');
  const done = el('div', 'progress-fill');
  done.style.width = `${Math.round((session.round / Math.max(session.budget, 1)) * 100)}%`;
  progress.appendChild(done);
  panel.appendChild(progress);

  const grid = el('div', 'card-grid');
  const bars = costBars(set.items);
  const locked = state.busy || state.pendingSelection !== null;
  for (const candidate of set.items) {
    grid.appendChild(candidateCard(
      candidate,
      bars.get(candidate.index) ?? 1,
      locked,
      state.pendingSelection === candidate.index,
      () => handlers.onChoice(set.round, candidate.index),
    ));
  }
  panel.appendChild(grid);
  if (state.error) panel.appendChild(errorBox(state, handlers));
  root.replaceChildren(panel);
}

export function renderResult(root: HTMLElement, state: AppState,
                             handlers: Handlers): void {
  const session = state.session;
  if (!session || !session.final) return;
  const panel = el('section', 'panel result-panel');
  panel.appendChild(el('h1', undefined, session.final.success
    ? 'Your personalized plan'
    : 'Closest plan found'));
  if (!session.final.success) {
    panel.appendChild(el('p', 'warning',
      'No plan fully overturns the decision within the step limit; '
      + 'this is the best attempt.'));
  }
  const list = el('ol', 'action-list result-list');
  if (session.final.actions.length === 0) {
    panel.appendChild(el('p', 'muted', 'No changes needed.'));
  }
  for (const action of session.final.actions) {
    const item = el('li', 'action-item');
    item.appendChild(el('span', 'action-label', action.label));
    item.appendChild(el('span', 'muted small',
                        ` (${action.feature}: ${action.from} → ${action.to})`));
    if (action.rule) {
      const details = el('details', 'action-rule');
      details.appendChild(el('summary', undefined, 'why this step'));
      details.appendChild(el('code', undefined, action.rule));
      item.appendChild(details);
    }
    list.appendChild(item);
  }
  panel.appendChild(list);

  const restart = el('button', 'secondary', 'Start over');
  restart.addEventListener('click', handlers.onRestart);
  panel.appendChild(restart);
  root.replaceChildren(panel);
}

function errorBox(state: AppState, handlers: Handlers): HTMLElement {
  const box = el('div', 'error-box');
  box.appendChild(el('span', undefined, state.error ?? 'request failed'));
  if (state.pendingSelection !== null) {
    const retry = el('button', 'secondary retry-button', 'Retry');
    retry.addEventListener('click', handlers.onRetry);
    box.appendChild(retry);
  }
  return box;
}

export function render(root: HTMLElement, state: AppState,
                       handlers: Handlers): void {
  switch (state.screen) {
    case 'profile':
      renderProfile(root, state, handlers);
      break;
    case 'round':
      renderRound(root, state, handlers);
      break;
    case 'result':
      renderResult(root, state, handlers);
      break;
  }
}
