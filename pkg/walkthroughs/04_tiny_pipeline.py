"""Train every stage at toy scale in memory, then personalise a sample with fused inputs.

Takes a couple of minutes on one core. The numbers it prints are far from
the desk-scale results; the point is to show how the stages connect.
"""

import numpy as np

from persona_motion import pipeline as pl
from persona_motion.data import generate_corpus, prompt_from_text
from persona_motion.diffusion import make_schedule, sample
from persona_motion.fusion import CAFConfig, context_aware_fusion
from persona_motion.runconfig import RunConfig

cfg = RunConfig(personas=2, contents=3, takes=4, test_takes=2, pretrain_takes=4, d_model=32, heads=2,
                denoiser_depth=2, clip_epochs=6, pretrain_epochs=6, finetune_epochs=4, T=20, samples=24,
                pool_size=8, pra_epochs=30, seed=3)
corpus = generate_corpus(pl.corpus_manifest(cfg))

clip, clip_history = pl.train_clip_stage(cfg, corpus)
print(f"text-motion alignment loss {clip_history[0]['loss']:.3f} -> {clip_history[-1]['loss']:.3f}")

denoiser, pre_history = pl.train_denoiser_stage(cfg, corpus, clip)
print(f"denoiser pretraining loss  {pre_history[0]['total']:.3f} -> {pre_history[-1]['total']:.3f}")

model, ft_history = pl.personalize_stage(cfg, corpus, clip, denoiser)
last = ft_history[-1]
print(f"finetuning loss {last['total']:.3f}; gates text {last['gamma_t']:+.4f} visual {last['gamma_v']:+.4f}; "
      f"frozen gradient norm {last['frozen_grad_norm']}")

# Condition on two walks of persona 1 and ask for a different action.
inputs = [c.features for c in corpus.split("test") if c.persona_id == 1 and c.content_id == "walk-line"][:2]
prompt = prompt_from_text("a person runs forward")
fused = context_aware_fusion(model, inputs, prompt, CAFConfig(k=2), s_t=cfg.s_t)
print("fusion weights over the inputs:", np.round(fused.weights, 4).tolist())
motion = sample([prompt], model, make_schedule(cfg.T, cfg.schedule), pl.guidance_for(cfg, "MI"),
                np.random.default_rng(0), frames=cfg.frames, V_star=fused.V_star[None], P_star=fused.P_star[None])[0]
print("generated motion:", motion.shape)

classifier = pl.train_classifier(cfg, corpus)
rows, _ = pl.evaluate(cfg, corpus, model, classifier, ["SI"])
print({k: rows[0][k] for k in ("fid", "rprec3", "pra", "diversity")})
