/**
 * Command line front end.
 *
 *   bundle-adapters estimate <imagesDir> <outDir> --config adapter.json [--jobs N] [--filter]
 *   bundle-adapters filter <imagesDir> --config adapter.json
 *
 * Exit codes match the downstream tooling: 0 success, 1 a validation or
 * configuration failure, 2 an I/O error, 3 a model stage failure.
 */

import { readdirSync, realpathSync } from "node:fs";
import { join } from "node:path";
import { pathToFileURL } from "node:url";

import { estimateToDir } from "./estimate.js";
import { filterImage, FilterConfigError, DEFAULT_FILTER_LABELS } from "./filter.js";
import { looksLikeImagePath } from "./image.js";
import {
  configuredProviders,
  loadAdapterConfig,
  requireStages,
  ESTIMATE_STAGES,
  ProviderConfigError,
  StageClientError,
} from "./providers.js";
import type { ModelProviders } from "./providers.js";

const USAGE = `usage: bundle-adapters <command> [options]

commands:
  estimate <imagesDir> <outDir> --config <adapter.json> [--jobs N] [--filter]
  filter   <imagesDir> --config <adapter.json>
`;

interface ParsedArgs {
  positional: string[];
  options: Map<string, string | true>;
}

function parseArgs(argv: string[], flags: Set<string>, valued: Set<string>): ParsedArgs {
  const positional: string[] = [];
  const options = new Map<string, string | true>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      positional.push(arg);
    } else if (flags.has(arg)) {
      options.set(arg, true);
    } else if (valued.has(arg)) {
      const value = argv[++i];
      if (value === undefined) throw new UsageError(`${arg} needs a value`);
      options.set(arg, value);
    } else {
      throw new UsageError(`unrecognized option ${arg}`);
    }
  }
  return { positional, options };
}

class UsageError extends Error {}

function listImages(dir: string): string[] {
  return readdirSync(dir)
    .filter(looksLikeImagePath)
    .sort()
    .map((name) => join(dir, name));
}

async function mapPool<T, R>(
  items: T[],
  jobs: number,
  fn: (item: T) => Promise<R>,
): Promise<PromiseSettledResult<R>[]> {
  const results: PromiseSettledResult<R>[] = new Array(items.length);
  let next = 0;
  const worker = async () => {
    while (next < items.length) {
      const i = next++;
      try {
        results[i] = { status: "fulfilled", value: await fn(items[i]) };
      } catch (reason) {
        results[i] = { status: "rejected", reason };
      }
    }
  };
  await Promise.all(Array.from({ length: Math.min(jobs, items.length) }, worker));
  return results;
}

function requireClassifier(providers: ModelProviders) {
  if (!providers.classify) {
    throw new ProviderConfigError('filtering needs a "classify" stage in the adapter config');
  }
  return { classify: providers.classify.bind(providers) };
}

async function cmdEstimate(args: ParsedArgs): Promise<number> {
  const [imagesDir, outDir] = args.positional;
  if (!imagesDir || !outDir) throw new UsageError("estimate needs <imagesDir> <outDir>");
  const configPath = args.options.get("--config");
  if (typeof configPath !== "string") throw new UsageError("estimate needs --config");
  const jobs = Math.max(1, Number(args.options.get("--jobs") ?? 1) || 1);

  const config = loadAdapterConfig(configPath);
  requireStages(config, ESTIMATE_STAGES);
  if (args.options.has("--filter")) requireStages(config, ["classify"]);
  const providers = configuredProviders(config);
  const classifier = args.options.has("--filter") ? requireClassifier(providers) : null;

  const images = listImages(imagesDir);
  if (images.length === 0) {
    console.error(`error: no images found in ${imagesDir}`);
    return 1;
  }

  let kept = images;
  if (classifier) {
    kept = [];
    for (const image of images) {
      if (await filterImage(classifier, image, DEFAULT_FILTER_LABELS)) {
        kept.push(image);
      } else {
        console.log(`${image}: dropped by filter`);
      }
    }
  }

  const results = await mapPool(kept, jobs, (image) => estimateToDir(image, providers, outDir));
  let worst = 0;
  results.forEach((result, i) => {
    if (result.status === "fulfilled") {
      console.log(`${kept[i]}: wrote ${result.value}`);
      return;
    }
    const reason = result.reason as Error;
    console.error(`error: ${kept[i]}: ${reason.message}`);
    worst = Math.max(worst, reason instanceof StageClientError ? 3 : 1);
  });
  return worst;
}

async function cmdFilter(args: ParsedArgs): Promise<number> {
  const [imagesDir] = args.positional;
  if (!imagesDir) throw new UsageError("filter needs <imagesDir>");
  const configPath = args.options.get("--config");
  if (typeof configPath !== "string") throw new UsageError("filter needs --config");

  const config = loadAdapterConfig(configPath);
  requireStages(config, ["classify"]);
  const classifier = requireClassifier(configuredProviders(config));
  for (const image of listImages(imagesDir)) {
    const keep = await filterImage(classifier, image, DEFAULT_FILTER_LABELS);
    console.log(`${image}\t${keep ? "keep" : "drop"}`);
  }
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (command === undefined || command === "--help" || command === "-h") {
    process.stdout.write(USAGE);
    return command === undefined ? 2 : 0;
  }
  try {
    if (command === "estimate") {
      return await cmdEstimate(
        parseArgs(rest, new Set(["--filter"]), new Set(["--config", "--jobs"])),
      );
    }
    if (command === "filter") {
      return await cmdFilter(parseArgs(rest, new Set(), new Set(["--config"])));
    }
    console.error(`error: unknown command ${command}`);
    process.stderr.write(USAGE);
    return 2;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    if (err instanceof ProviderConfigError || err instanceof FilterConfigError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    if (err instanceof StageClientError) {
      console.error(`error: ${err.message}`);
      return 3;
    }
    if ((err as NodeJS.ErrnoException).code !== undefined) {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    throw err;
  }
}

const runAsScript =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;

if (runAsScript) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
