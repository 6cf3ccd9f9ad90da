/**
 * Node bindings for the ptscatter point-cloud scattering pipeline.
 *
 * Everything delegates to the Python package's command-line interface
 * through its documented file formats (header-free CSV matrices in,
 * JSON out), so the numbers returned here are identical to what the CLI
 * writes.  No math is reimplemented on this side.
 *
 * CLI exit codes map onto typed errors: 2 -> UsageError (bad or
 * incompatible options), 3 -> DataError (malformed input data),
 * 4 -> NumericalError.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { delimiter, join, resolve } from "node:path";

/** Bad or incompatible configuration (CLI exit code 2). */
export class UsageError extends Error {}

/** Malformed or mismatched input data (CLI exit code 3). */
export class DataError extends Error {}

/** Numerical failure inside the pipeline (CLI exit code 4). */
export class NumericalError extends Error {}

export interface ExtractConfig {
  backend: "spectral" | "markov";
  kernel?: "gaussian" | "adaptive";
  /** largest dyadic scale exponent J (default 8) */
  maxScale?: number;
  /** largest moment exponent Q (default 4) */
  maxMoment?: number;
  /** scattering path order: 1, 2, or 3 (default 2) */
  order?: number;
  /** eigenpair count for the spectral backend */
  kappa?: number;
  /** Gaussian bandwidth, or "auto" for the sample-size rule */
  eps?: number | "auto";
  /** constant in the auto bandwidth rule (default 2.0) */
  epsConst?: number;
  /** intrinsic dimension of the cloud (default 2) */
  dim?: number;
  /** neighbor count for the adaptive kernel (default 5) */
  knn?: number;
  /** diffusion-time rescaling, spectral backend only (default 1) */
  tau?: number;
  wavelets?: "plain" | "sqrt";
}

export interface FeatureResult {
  /** one row of scattering moments per input signal, canonical order */
  values: number[][];
  /** scale tuple of each feature column */
  paths: number[][];
  /** moment exponent of each feature column */
  q: number[];
}

export interface EigsResult {
  eigenvalues: number[];
  /** eigenvectors[k] is the length-N eigenvector of eigenvalues[k] */
  eigenvectors: number[][];
}

function pythonExecutable(): string {
  return process.env.PTSCATTER_PYTHON ?? "python3";
}

/** PYTHONPATH pointing at the sibling source tree, so the bindings work
 *  from a repository checkout even without `pip install`. */
function pythonPathEnv(): NodeJS.ProcessEnv {
  const src = resolve(__dirname, "..", "..", "src");
  const existing = process.env.PYTHONPATH;
  return {
    ...process.env,
    PYTHONPATH: existing ? `${src}${delimiter}${existing}` : src,
  };
}

function runCli(args: string[]): void {
  const proc = spawnSync(pythonExecutable(), ["-m", "ptscatter", ...args], {
    encoding: "utf-8",
    env: pythonPathEnv(),
    maxBuffer: 1 << 28,
  });
  if (proc.error) {
    throw new NumericalError(`failed to launch the pipeline: ${proc.error.message}`);
  }
  if (proc.status === 0) return;
  const detail = (proc.stderr || proc.stdout || "").trim();
  if (proc.status === 2) throw new UsageError(detail);
  if (proc.status === 3) throw new DataError(detail);
  throw new NumericalError(detail || `pipeline exited with status ${proc.status}`);
}

function checkMatrix(name: string, matrix: number[][]): void {
  if (!Array.isArray(matrix) || matrix.length === 0 || !Array.isArray(matrix[0])) {
    throw new DataError(`${name} must be a non-empty matrix (array of rows)`);
  }
  const width = matrix[0].length;
  for (const row of matrix) {
    if (row.length !== width) {
      throw new DataError(`${name} has ragged rows (${row.length} vs ${width})`);
    }
    for (const v of row) {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new DataError(`${name} contains a non-finite entry`);
      }
    }
  }
}

/** JS number -> shortest decimal that round-trips to the same float64. */
function toCsv(matrix: number[][]): string {
  return matrix.map((row) => row.map((v) => String(v)).join(",")).join("\n") + "\n";
}

function parseCsv(text: string): number[][] {
  return text
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => line.split(",").map(Number));
}

function withTempDir<T>(body: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "ptscatter-"));
  try {
    return body(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * Scattering moments of each signal over the given point cloud.
 *
 * `points` is N x n (one point per row), `signals` is S x N (one signal
 * per row).  Returns values/paths/q exactly as the CLI's JSON feature
 * file carries them.
 */
export function extractFeatures(
  points: number[][],
  signals: number[][],
  config: ExtractConfig,
): FeatureResult {
  checkMatrix("points", points);
  checkMatrix("signals", signals);
  if (signals[0].length !== points.length) {
    throw new DataError(
      `signals have ${signals[0].length} columns but the cloud has ${points.length} points`,
    );
  }
  return withTempDir((dir) => {
    const pointsPath = join(dir, "points.csv");
    const signalsPath = join(dir, "signals.csv");
    const outPath = join(dir, "features.json");
    writeFileSync(pointsPath, toCsv(points));
    writeFileSync(signalsPath, toCsv(signals));
    const args = [
      "extract",
      "--points", pointsPath,
      "--signals", signalsPath,
      "--backend", config.backend,
      "--out", outPath,
    ];
    if (config.kernel !== undefined) args.push("--kernel", config.kernel);
    if (config.maxScale !== undefined) args.push("--J", String(config.maxScale));
    if (config.maxMoment !== undefined) args.push("--Q", String(config.maxMoment));
    if (config.order !== undefined) args.push("--order", String(config.order));
    if (config.kappa !== undefined) args.push("--kappa", String(config.kappa));
    if (config.eps !== undefined) args.push("--eps", String(config.eps));
    if (config.epsConst !== undefined) args.push("--eps-const", String(config.epsConst));
    if (config.dim !== undefined) args.push("--dim", String(config.dim));
    if (config.knn !== undefined) args.push("--knn", String(config.knn));
    if (config.tau !== undefined) args.push("--tau", String(config.tau));
    if (config.wavelets !== undefined) args.push("--wavelets", config.wavelets);
    runCli(args);
    const payload = JSON.parse(readFileSync(outPath, "utf-8"));
    return { values: payload.values, paths: payload.paths, q: payload.q };
  });
}

/**
 * Smallest eigenpairs of the Gaussian-kernel graph Laplacian of a cloud.
 */
export function laplacianEigs(
  points: number[][],
  kappa: number,
  dim: number,
  eps: number | "auto" = "auto",
): EigsResult {
  checkMatrix("points", points);
  return withTempDir((dir) => {
    const pointsPath = join(dir, "points.csv");
    const outPath = join(dir, "eigs.json");
    writeFileSync(pointsPath, toCsv(points));
    runCli([
      "eigs",
      "--points", pointsPath,
      "--kappa", String(kappa),
      "--dim", String(dim),
      "--eps", String(eps),
      "--out", outPath,
    ]);
    const payload = JSON.parse(readFileSync(outPath, "utf-8"));
    return { eigenvalues: payload.eigenvalues, eigenvectors: payload.eigenvectors };
  });
}

/** Seeded uniform sample of the unit two-sphere, N x 3. */
export function sampleSphere(n: number, seed: number): number[][] {
  return withTempDir((dir) => {
    const outPath = join(dir, "sphere.csv");
    runCli(["gen-sphere", "--n", String(n), "--seed", String(seed), "--out", outPath]);
    return parseCsv(readFileSync(outPath, "utf-8"));
  });
}
