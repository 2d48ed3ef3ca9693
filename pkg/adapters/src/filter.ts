/**
 * Zero-shot suitability filter.
 *
 * An image is classified against a fixed label set and kept only when the
 * best-scoring label is one of the positive ones. Scenes photographed as
 * scenes pass; product shots, paintings, collages, screenshots, and text
 * pages get dropped before any geometry is estimated.
 */

export interface FilterLabelSet {
  positive: string[];
  negative: string[];
}

export const DEFAULT_FILTER_LABELS: FilterLabelSet = {
  positive: [
    "a DSLR photo of an indoor scene",
    "a DSLR of an outdoor scene",
    "an iphone photo of an indoor scene",
    "an iphone photo of an outdoor scene",
  ],
  negative: [
    "a close up shot of a single object",
    "a product displayed in front of a white back ground",
    "a painting",
    "a collage of images",
    "a screenshot of graphics user interface",
    "a piece of text",
  ],
};

export interface ZeroShotClassifier {
  /** Scores aligned with the label list, higher is a better match. */
  classify(imagePath: string, labels: string[]): Promise<number[]>;
}

export class FilterConfigError extends Error {}

/** True when the image should be kept for downstream processing. */
export async function filterImage(
  classifier: ZeroShotClassifier,
  imagePath: string,
  labels: FilterLabelSet = DEFAULT_FILTER_LABELS,
): Promise<boolean> {
  if (labels.positive.length === 0 || labels.negative.length === 0) {
    throw new FilterConfigError("filter label set must have positive and negative labels");
  }
  const all = [...labels.positive, ...labels.negative];
  const scores = await classifier.classify(imagePath, all);
  if (scores.length !== all.length) {
    throw new Error(`classifier returned ${scores.length} scores for ${all.length} labels`);
  }
  let best = 0;
  for (let i = 1; i < scores.length; i++) {
    if (scores[i] > scores[best]) best = i;
  }
  return best < labels.positive.length;
}
