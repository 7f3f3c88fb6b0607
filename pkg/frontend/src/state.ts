/**
 * Sampling-parameter state with the same validity rules the server enforces,
 * applied eagerly so invalid combinations are unsendable: s1 <= s2, p >= 1,
 * termination opacity in [0, 1).
 */

export const MODES = ["reference", "skip", "skip-adaptive"] as const;
export type Mode = (typeof MODES)[number];

const S_MIN = 1e-4;

export interface ParamsMessage {
  type: "SetParams";
  s1: number;
  s2: number;
  p: number;
  mode: Mode;
  termination_opacity: number;
}

export class ParamsState {
  private _s1: number;
  private _s2: number;
  private _p: number;
  private _termination: number;
  mode: Mode;

  constructor(s1 = 0.05, s2 = 0.25, p = 2.0, mode: Mode = "skip-adaptive",
              termination = 0.99) {
    this._s1 = Math.max(s1, S_MIN);
    this._s2 = Math.max(s2, this._s1);
    this._p = Math.max(p, 1.0);
    this._termination = Math.min(Math.max(termination, 0), 1 - 1e-9);
    this.mode = mode;
  }

  get s1(): number { return this._s1; }
  get s2(): number { return this._s2; }
  get p(): number { return this._p; }
  get terminationOpacity(): number { return this._termination; }

  /** Raising s1 past s2 drags s2 along, so s1 <= s2 always holds. */
  setS1(v: number): void {
    this._s1 = Math.max(v, S_MIN);
    if (this._s2 < this._s1) {
      this._s2 = this._s1;
    }
  }

  /** Lowering s2 below s1 clamps to s1. */
  setS2(v: number): void {
    this._s2 = Math.max(v, this._s1);
  }

  setP(v: number): void {
    this._p = Math.max(v, 1.0);
  }

  setTerminationOpacity(v: number): void {
    this._termination = Math.min(Math.max(v, 0), 1 - 1e-9);
  }

  /** Adaptivity is off exactly when the two step bounds coincide. */
  get fixedStep(): boolean {
    return this._s1 === this._s2 || this.mode !== "skip-adaptive";
  }

  toMessage(): ParamsMessage {
    return {
      type: "SetParams",
      s1: this._s1,
      s2: this._s2,
      p: this._p,
      mode: this.mode,
      termination_opacity: this._termination,
    };
  }
}
