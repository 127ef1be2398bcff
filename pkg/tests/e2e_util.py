"""Desk-scale end-to-end experiment shared by the acceptance suite.

One run: synthesize calibration and test sets, pretrain on calibration
trials, fine-tune three classifiers (scratch G=1, scratch G=2,
pretrained G=1), evaluate all on raw test trials, and compare masked
reconstruction error of the pretrained vs a freshly initialized model.
"""

from dataclasses import replace

from spellerssl.aggregation import blocks_from_epochs, build_training_set
from spellerssl.data import SynthConfig, synth_generate
from spellerssl.erphead import ErpHead, HeadConfig, finetune
from spellerssl.pipeline import evaluate_speller
from spellerssl.preprocessing import MaskSpec
from spellerssl.unet import UNet1d, UNetConfig, pretrain, reconstruction_mse

DESK_SYNTH = SynthConfig(n_characters=36, channels=8, n_repetitions=15,
                         p300_amplitude=0.45, noise_sigma=1.0, seed=0)
DESK_WIDTH_MULT = 0.125
DESK_HEAD_WIDTH = 16
PRETRAIN_EPOCHS = 20
FINETUNE_EPOCHS = 10


def _finetune_and_evaluate(base: UNet1d, trainset, test_epochs, seed, checkpoint=None,
                           finetune_epochs=FINETUNE_EPOCHS, group_size=1):
    head = ErpHead(HeadConfig(base.cfg.bottleneck_channels, DESK_HEAD_WIDTH), seed=seed + 1)
    finetune(base, head, trainset, checkpoint=checkpoint, epochs=finetune_epochs,
             seed=seed + 2)
    label = "checkpoint" if checkpoint is not None else "scratch"
    return evaluate_speller(base, head, test_epochs, pretraining=label,
                            group_size=group_size)


def run_desk_experiment(seed: int, synth_config: SynthConfig = DESK_SYNTH,
                        pretrain_epochs: int = PRETRAIN_EPOCHS,
                        finetune_epochs: int = FINETUNE_EPOCHS) -> dict:
    cal = synth_generate(replace(synth_config, seed=seed))
    test = synth_generate(replace(synth_config, seed=seed + 5000))
    ucfg = UNetConfig(in_channels=synth_config.channels, width_multiplier=DESK_WIDTH_MULT)
    mask = MaskSpec(seed=seed + 11)

    ssl_model = UNet1d(ucfg, seed=seed + 20)
    ssl_ckpt, ssl_log = pretrain(ssl_model, cal.data, epochs=pretrain_epochs,
                                 mask=mask, seed=seed + 21)
    mse_pretrained = reconstruction_mse(ssl_model, test.data, mask=mask, seed=seed + 30)
    mse_random = reconstruction_mse(UNet1d(ucfg, seed=seed + 31), test.data,
                                    mask=mask, seed=seed + 30)

    blocks = blocks_from_epochs(cal)
    train_g1 = build_training_set(blocks, 1)
    train_g2 = build_training_set(blocks, 2)

    scratch_g1 = _finetune_and_evaluate(UNet1d(ucfg, seed=seed + 40), train_g1, test,
                                        seed + 41, finetune_epochs=finetune_epochs)
    scratch_g2 = _finetune_and_evaluate(UNet1d(ucfg, seed=seed + 50), train_g2, test,
                                        seed + 51, finetune_epochs=finetune_epochs,
                                        group_size=2)
    pretrained_g1 = _finetune_and_evaluate(UNet1d(ucfg, seed=seed + 60), train_g1, test,
                                           seed + 61, checkpoint=ssl_ckpt,
                                           finetune_epochs=finetune_epochs)

    return {
        "seed": seed,
        "loss_first_epoch": float(sum(r["total"] for r in ssl_log
                                      if r["epoch"] == 1) / sum(1 for r in ssl_log
                                                                if r["epoch"] == 1)),
        "loss_last_epoch": float(sum(r["total"] for r in ssl_log
                                     if r["epoch"] == pretrain_epochs)
                                 / sum(1 for r in ssl_log if r["epoch"] == pretrain_epochs)),
        "mse_pretrained": mse_pretrained,
        "mse_random": mse_random,
        "crr_scratch_g1": scratch_g1.crr_per_repetition.tolist(),
        "crr_scratch_g2": scratch_g2.crr_per_repetition.tolist(),
        "crr_pretrained_g1": pretrained_g1.crr_per_repetition.tolist(),
        "fdr_scratch_g1": scratch_g1.fdr,
        "fdr_scratch_g2": scratch_g2.fdr,
        "fdr_pretrained_g1": pretrained_g1.fdr,
        "acc_scratch_g1": scratch_g1.accuracy,
    }


def orderings(result: dict) -> dict:
    """The three directional checks of one desk run."""
    return {
        "pretrained_crr_at_7_ge_scratch":
            result["crr_pretrained_g1"][6] >= result["crr_scratch_g1"][6],
        "fdr_g2_gt_g1_scratch": result["fdr_scratch_g2"] > result["fdr_scratch_g1"],
        "pretrained_mse_lt_random": result["mse_pretrained"] < result["mse_random"],
    }
