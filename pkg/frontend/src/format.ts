/* Unit formatting. Powers travel as mW in the protocol but field crews
 * think in dBm, so most places show both. */

export function mwToDbm(mw: number): number {
  return 10 * Math.log10(mw);
}

export function fmtPower(mw: number): string {
  return `${sig(mw, 3)} mW (${mwToDbm(mw).toFixed(1)} dBm)`;
}

export function fmtGain(w: number): string {
  return sig(w, 4);
}

export function fmtScore(x: number): string {
  return sig(x, 6);
}

export function fmtOutage(p: number): string {
  if (p === 0) return "0";
  if (p < 1e-3) return p.toExponential(2);
  return sig(p, 3);
}

/* significant digits without trailing zero noise */
export function sig(x: number, digits: number): string {
  if (!isFinite(x)) return String(x);
  if (x === 0) return "0";
  return String(Number(x.toPrecision(digits)));
}
