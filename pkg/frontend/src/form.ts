import type { CardFeature, FeatureValues, ScorecardDoc } from "./types.js";

export interface FieldState {
  name: string;
  raw: string;
  unknown: boolean;
  hint: string;
}

export interface FormModel {
  fields: FieldState[];
}

const finiteBounds = (feature: CardFeature): number[] => {
  const seen = new Set<number>();
  for (const level of feature.levels) {
    for (const b of [level.lower, level.upper]) {
      if (b !== null && Number.isFinite(b)) seen.add(b);
    }
  }
  return Array.from(seen).sort((a, b) => a - b);
};

/** Placeholder text giving the user a sense of the scale the rules use. */
export const rangeHint = (feature: CardFeature): string => {
  const bounds = finiteBounds(feature);
  if (bounds.length === 0) return "any number";
  if (bounds.length === 1) return `rules split at ${bounds[0]}`;
  return `rules span ${bounds[0]} to ${bounds[bounds.length - 1]}`;
};

export const buildForm = (doc: ScorecardDoc): FormModel => ({
  fields: doc.features.map((f) => ({
    name: f.name,
    raw: "",
    unknown: false,
    hint: rangeHint(f),
  })),
});

export const setValue = (form: FormModel, name: string, raw: string): FormModel => ({
  fields: form.fields.map((f) => (f.name === name ? { ...f, raw } : f)),
});

export const setUnknown = (form: FormModel, name: string, unknown: boolean): FormModel => ({
  fields: form.fields.map((f) => (f.name === name ? { ...f, unknown } : f)),
});

/** Non-null only for text that is present but unparseable. */
export const fieldError = (field: FieldState): string | null => {
  if (field.unknown) return null;
  const t = field.raw.trim();
  if (t === "") return null;
  return Number.isFinite(Number(t)) ? null : "enter a number or tick unknown";
};

export const fieldComplete = (field: FieldState): boolean =>
  field.unknown || (field.raw.trim() !== "" && fieldError(field) === null);

/** Submit gate: every feature needs a value or an explicit unknown. */
export const canSubmit = (form: FormModel): boolean => form.fields.every(fieldComplete);

export const payload = (form: FormModel): FeatureValues =>
  Object.fromEntries(
    form.fields.map((f) => [f.name, f.unknown ? null : Number(f.raw.trim())]),
  );
