/**
 * Static cohort comparison data for the summary dashboard's right panel.
 *
 * Real cohort timings are not available to this client, so the panel
 * compares the student's study duration against a bundled reference
 * table of average durations per knowledge point.
 */

export interface CohortComparison {
  studentMs: number;
  cohortMs: number;
  ratio: number;
  label: "faster than average" | "about average" | "slower than average";
}

export const COHORT_AVERAGE_MS: Record<string, number> = {
  "kp.multiplication": 240_000,
  "kp.order-of-operations": 300_000,
  "kp.addition": 150_000,
  "kp.subtraction": 160_000,
  "kp.carrying": 270_000,
};

export const COHORT_FALLBACK_MS = 250_000;

// Within 15% of the cohort mean reads as "about average".
const ABOUT_AVERAGE_BAND = 0.15;

export function cohortAverageFor(knowledgePointIds: string[]): number {
  const known = knowledgePointIds
    .map((kp) => COHORT_AVERAGE_MS[kp])
    .filter((ms): ms is number => ms !== undefined);
  if (known.length === 0) {
    return COHORT_FALLBACK_MS;
  }
  return known.reduce((sum, ms) => sum + ms, 0) / known.length;
}

export function compareToCohort(
  studentMs: number,
  knowledgePointIds: string[],
): CohortComparison {
  if (studentMs < 0) {
    throw new Error("study duration must be >= 0");
  }
  const cohortMs = cohortAverageFor(knowledgePointIds);
  const ratio = studentMs / cohortMs;
  let label: CohortComparison["label"];
  if (ratio < 1 - ABOUT_AVERAGE_BAND) {
    label = "faster than average";
  } else if (ratio > 1 + ABOUT_AVERAGE_BAND) {
    label = "slower than average";
  } else {
    label = "about average";
  }
  return { studentMs, cohortMs, ratio, label };
}
