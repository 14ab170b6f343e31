/**
 * Token-allocation widget model. Inputs are clamped so the budget can
 * never be exceeded, and the preview shows each option's effective
 * votes under the space's method: the allocation itself for weighted
 * voting, its square root for quadratic voting (4 tokens = 2 votes).
 */

export type VotingMethod = "WEIGHTED" | "QUADRATIC";

export const QUADRATIC_TOOLTIP =
  "Quadratic voting counts the square root of the tokens you place on " +
  "an option: 4 tokens = 2 votes, 9 tokens = 3 votes. Spreading tokens " +
  "lets you support several options; stacking them shows strength of " +
  "preference at a diminishing rate.";

export class AllocationDraft {
  readonly budget: number;
  readonly method: VotingMethod;
  private readonly values: number[];

  constructor(budget: number, optionCount: number, method: VotingMethod) {
    if (!Number.isSafeInteger(budget) || budget < 0) {
      throw new Error("budget must be a non-negative integer");
    }
    if (optionCount < 2) throw new Error("need at least two options");
    this.budget = budget;
    this.method = method;
    this.values = new Array(optionCount).fill(0);
  }

  get allocations(): number[] {
    return [...this.values];
  }

  get spent(): number {
    return this.values.reduce((a, b) => a + b, 0);
  }

  get remaining(): number {
    return this.budget - this.spent;
  }

  /**
   * Set one option's tokens; the value is floored to an integer and
   * clamped into [0, current + remaining] so the total never exceeds
   * the budget. Returns the value actually stored.
   */
  setAllocation(index: number, value: number): number {
    if (index < 0 || index >= this.values.length) throw new Error("no such option");
    const requested = Math.max(0, Math.floor(Number.isFinite(value) ? value : 0));
    const ceiling = this.values[index]! + this.remaining;
    const clamped = Math.min(requested, ceiling);
    this.values[index] = clamped;
    return clamped;
  }

  /** Effective votes per option under the draft's voting method. */
  preview(): number[] {
    return this.values.map((tokens) =>
      this.method === "QUADRATIC" ? Math.sqrt(tokens) : tokens,
    );
  }

  /** Preview rounded to 2 decimals for display. */
  previewDisplay(): string[] {
    return this.preview().map((votes) => votes.toFixed(2));
  }

  isComplete(): boolean {
    return this.remaining >= 0 && this.spent > 0;
  }
}
