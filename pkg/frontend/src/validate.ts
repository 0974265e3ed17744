/**
 * Client-side feature validation mirroring the service's schema checks,
 * so obviously invalid profiles never produce a request.
 */

import type { FeatureSpec } from './types.js';

export interface FieldError {
  feature: string;
  message: string;
}

export function validateFeature(spec: FeatureSpec, raw: string): FieldError | null {
  if (spec.kind === 'categorical') {
    if (!spec.levels.includes(raw)) {
      return { feature: spec.name, message: `choose one of: ${spec.levels.join(', ')}` };
    }
    return null;
  }
  const value = Number(raw);
  if (raw.trim() === '' || Number.isNaN(value)) {
    return { feature: spec.name, message: 'enter a number' };
  }
  if (value < spec.min || value > spec.max) {
    return { feature: spec.name, message: `must be between ${spec.min} and ${spec.max}` };
  }
  const steps = (value - spec.min) / spec.step;
  if (Math.abs(steps - Math.round(steps)) > 1e-9) {
    return { feature: spec.name, message: `must be a multiple of ${spec.step} from ${spec.min}` };
  }
  return null;
}

export function validateProfile(
  specs: FeatureSpec[],
  values: Record<string, string>,
): { errors: FieldError[]; features: Record<string, number | string> } {
  const errors: FieldError[] = [];
  const features: Record<string, number | string> = {};
  for (const spec of specs) {
    const raw = values[spec.name] ?? '';
    const error = validateFeature(spec, raw);
    if (error) {
      errors.push(error);
      continue;
    }
    features[spec.name] = spec.kind === 'categorical' ? raw : Number(raw);
  }
  return { errors, features };
}
