"""Classifier-free guidance arithmetic and context-aware fusion of several persona inputs."""

import numpy as np

from persona_motion.diffusion import GuidanceConfig, cfg_combine
from persona_motion.fusion import fuse, mean_persona_token, topk_softmax

# Guidance mixes the visual-only and text-only corrections with weight b.
guidance = GuidanceConfig(g_t=10, g_v=15, b=0.7)
print("combined prediction on a scalar toy:", cfg_combine(1.0, 0.4, 0.7, guidance))
print("unit guidance returns the full prediction:",
      cfg_combine(1.0, 0.4, 0.7, GuidanceConfig(g_t=1, g_v=1, b=0.3)))

# Fusion keeps the k inputs most similar to the prompt and softmaxes their similarities.
similarities = np.array([0.9, 0.5, 0.1])
weights, selected = topk_softmax(similarities, k=2)
print("\nweights for similarities", similarities.tolist(), "->", np.round(weights, 4).tolist())
print("selected inputs:", list(selected))

rng = np.random.default_rng(0)
V_stars = [rng.normal(size=(n, 8)) for n in (17, 23, 33)]  # per-input visual features of varying length
P_stars = rng.normal(size=(3, 8))
V_fused, P_fused = fuse(V_stars, P_stars, weights, length=32)
print("fused visual condition:", V_fused.shape, " fused persona token:", P_fused.shape)
print("distance to the plain mean token:", float(np.linalg.norm(P_fused - mean_persona_token(P_stars))))
