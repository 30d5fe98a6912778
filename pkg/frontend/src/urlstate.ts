import { setUnknown, setValue, type FormModel } from "./form.js";

export const UNKNOWN_TOKEN = "unknown";

/** Query string for the current inputs, e.g. "ap_hi=140&age=unknown". */
export const encodeForm = (form: FormModel): string => {
  const params = new URLSearchParams();
  for (const f of form.fields) {
    if (f.unknown) params.set(f.name, UNKNOWN_TOKEN);
    else if (f.raw.trim() !== "") params.set(f.name, f.raw.trim());
  }
  return params.toString();
};

/** Values for known feature names only; everything else is dropped. */
export const decodeQuery = (query: string, names: string[]): Map<string, string> => {
  const params = new URLSearchParams(query);
  const out = new Map<string, string>();
  for (const name of names) {
    const v = params.get(name);
    if (v !== null && v.trim() !== "") out.set(name, v.trim());
  }
  return out;
};

/**
 * Fill a form from decoded query values. The unknown token ticks the
 * checkbox; anything non-numeric is ignored rather than loaded as junk.
 */
export const applyQuery = (form: FormModel, decoded: Map<string, string>): FormModel => {
  let next = form;
  for (const [name, value] of decoded) {
    if (value === UNKNOWN_TOKEN) next = setUnknown(next, name, true);
    else if (Number.isFinite(Number(value))) next = setValue(next, name, value);
  }
  return next;
};
