// The pipeline draft the operator composes, serialized verbatim to the
// JSON contract the service expects. Validation mirrors the server-side
// checks so the process button can stay disabled on junk drafts.

export type OpSpec = { op: string } & Record<string, unknown>;

export interface OpField {
  name: string;
  kind: "number" | "choice";
  choices?: string[];
  value: number | string;
  min?: number;
  max?: number;
  step?: number;
}

export interface OpTemplate {
  op: string;
  label: string;
  fields: OpField[];
}

export const OP_TEMPLATES: OpTemplate[] = [
  { op: "rgb2gray", label: "grayscale", fields: [] },
  { op: "complement", label: "complement", fields: [] },
  { op: "histogram", label: "histogram", fields: [] },
  {
    op: "gray_adjust",
    label: "gray adjust",
    fields: [
      { name: "low_in", kind: "number", value: 0.0, min: 0, max: 1, step: 0.05 },
      { name: "high_in", kind: "number", value: 1.0, min: 0, max: 1, step: 0.05 },
      { name: "gamma", kind: "number", value: 1.0, min: 0.1, max: 10, step: 0.1 },
    ],
  },
  {
    op: "noise_filter",
    label: "noise filter",
    fields: [
      { name: "kind", kind: "choice", choices: ["median", "mean"], value: "median" },
      { name: "k", kind: "number", value: 3, min: 3, max: 15, step: 2 },
    ],
  },
  {
    op: "edge",
    label: "edge detect",
    fields: [
      { name: "operator", kind: "choice", choices: ["sobel", "prewitt", "canny"], value: "sobel" },
      { name: "threshold_frac", kind: "number", value: 0.25, min: 0.01, max: 1, step: 0.01 },
    ],
  },
  {
    op: "rotate",
    label: "rotate 90",
    fields: [{ name: "turns", kind: "number", value: 1, min: 0, max: 3, step: 1 }],
  },
];

export function templateFor(op: string): OpTemplate | undefined {
  return OP_TEMPLATES.find((t) => t.op === op);
}

export function defaultSpec(op: string): OpSpec {
  const template = templateFor(op);
  const spec: OpSpec = { op };
  for (const field of template?.fields ?? []) {
    spec[field.name] = field.value;
  }
  return spec;
}

export interface DraftProblem {
  step: number; // 1-based, matching service errors
  message: string;
}

/** Mirror of the service-side step validation; null when the draft is sendable. */
export function validateDraft(draft: OpSpec[]): DraftProblem | null {
  for (let i = 0; i < draft.length; i++) {
    const step = i + 1;
    const spec = draft[i];
    switch (spec.op) {
      case "rgb2gray":
      case "complement":
      case "histogram":
        break;
      case "gray_adjust": {
        const low = Number(spec.low_in);
        const high = Number(spec.high_in);
        const gamma = Number(spec.gamma);
        if (!(low >= 0 && low < high && high <= 1)) {
          return { step, message: "need 0 <= low_in < high_in <= 1" };
        }
        if (!(gamma > 0)) {
          return { step, message: "gamma must be positive" };
        }
        break;
      }
      case "noise_filter": {
        const k = Number(spec.k);
        if (spec.kind !== "mean" && spec.kind !== "median") {
          return { step, message: "filter kind must be mean or median" };
        }
        if (!Number.isInteger(k) || k < 3 || k % 2 === 0) {
          return { step, message: "window must be odd and >= 3" };
        }
        break;
      }
      case "edge": {
        const operator = spec.operator;
        if (operator !== "sobel" && operator !== "prewitt" && operator !== "canny") {
          return { step, message: "operator must be sobel, prewitt or canny" };
        }
        if (operator !== "canny") {
          const frac = Number(spec.threshold_frac);
          if (!(frac > 0 && frac <= 1)) {
            return { step, message: "threshold_frac must be in (0, 1]" };
          }
        }
        break;
      }
      case "rotate": {
        const turns = Number(spec.turns);
        if (![0, 1, 2, 3].includes(turns)) {
          return { step, message: "turns must be 0..3" };
        }
        break;
      }
      default:
        return { step, message: `unknown op ${String(spec.op)}` };
    }
  }
  return null;
}

/** The exact JSON array POST /process expects. */
export function toJsonContract(draft: OpSpec[]): OpSpec[] {
  return draft.map((spec) => {
    const out: OpSpec = { op: spec.op };
    for (const [key, value] of Object.entries(spec)) {
      if (key !== "op") out[key] = value;
    }
    if (spec.op === "edge" && spec.operator === "canny") {
      delete out.threshold_frac;
    }
    return out;
  });
}
