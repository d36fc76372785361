"""The evaluation metrics on hand-made embeddings with known answers."""

import numpy as np

from persona_motion.eval import FeatureStats, diversity, fid, r_precision

rng = np.random.default_rng(0)
reference = FeatureStats(np.zeros(4), np.eye(4))
shifted = FeatureStats(np.array([3.0, 0, 0, 0]), np.eye(4))
wider = FeatureStats(np.zeros(4), 4 * np.eye(4))
print(f"FID, mean shifted by 3: {fid(reference, shifted):.4f}")
print(f"FID, std doubled:       {fid(reference, wider):.4f}")

prompts = rng.normal(size=(1024, 16))
matched = prompts + 0.1 * rng.normal(size=prompts.shape)
unrelated = rng.normal(size=prompts.shape)
print("\nR-precision top-3, matched motions:  ", np.round(r_precision(matched, prompts, pool_size=32), 3))
print("R-precision top-3, unrelated motions:", np.round(r_precision(unrelated, prompts, pool_size=32), 3))
print("chance level for top-3 of 32:        ", round(3 / 32, 3))

print(f"\ndiversity of standard normal embeddings in 16-d: {diversity(unrelated):.3f} (about sqrt(32) = 5.657)")
