"""Frozen Whisper encoder wrapper emitting per-layer hidden states.

Hidden states are taken after each transformer block (post residual); the
final block's state additionally passes the encoder's closing layer norm,
i.e. it equals the encoder output, matching what downstream consumers of
the pretrained model receive.
"""

from __future__ import annotations

import numpy as np
import torch

ENCODER_SIZES = {
    "tiny": dict(d_model=384, layers=4, heads=6, ffn=1536),
    "small": dict(d_model=768, layers=12, heads=12, ffn=3072),
}

HUB_IDS = {"tiny": "openai/whisper-tiny", "small": "openai/whisper-small"}


class EncoderRunner:
    """Runs the encoder in evaluation mode with gradients disabled.

    ``random_init=True`` builds an architecture-faithful encoder with
    seeded random weights instead of fetching pretrained ones; output
    shapes and determinism are identical, which is what offline tests
    need. Real extractions should use pretrained weights.
    """

    def __init__(self, size: str, random_init: bool = False, seed: int = 0):
        if size not in ENCODER_SIZES:
            raise ValueError(f"unknown encoder size {size!r}, expected one of {sorted(ENCODER_SIZES)}")
        from transformers import WhisperConfig, WhisperModel

        self.size = size
        spec = ENCODER_SIZES[size]
        self.width = spec["d_model"]
        self.num_layers = spec["layers"]
        if random_init:
            config = WhisperConfig(
                d_model=spec["d_model"],
                encoder_layers=spec["layers"],
                encoder_attention_heads=spec["heads"],
                encoder_ffn_dim=spec["ffn"],
                decoder_layers=1,
                decoder_attention_heads=spec["heads"],
                decoder_ffn_dim=spec["ffn"],
                num_mel_bins=80,
                max_source_positions=1500,
            )
            torch.manual_seed(seed)
            model = WhisperModel(config)
        else:
            try:
                model = WhisperModel.from_pretrained(HUB_IDS[size])
            except Exception as exc:
                raise RuntimeError(
                    f"could not fetch pretrained weights for {HUB_IDS[size]}: {exc}"
                ) from exc
        self._encoder = model.get_encoder().eval()
        for p in self._encoder.parameters():
            p.requires_grad_(False)

    def validate_layers(self, layers: list[int]) -> None:
        bad = [l for l in layers if not 1 <= l <= self.num_layers]
        if bad:
            raise ValueError(
                f"layers {bad} outside [1, {self.num_layers}] for size {self.size!r}"
            )

    def layer_states(self, mel: np.ndarray, layers: list[int]) -> dict[int, np.ndarray]:
        """Hidden state after each requested block, as (1500, width) float32."""
        self.validate_layers(layers)
        feats = torch.from_numpy(np.ascontiguousarray(mel, dtype=np.float32)).unsqueeze(0)
        with torch.no_grad():
            out = self._encoder(input_features=feats, output_hidden_states=True)
        # hidden_states[0] is the pre-block embedding; [i] is block i's output
        hidden = out.hidden_states
        return {layer: hidden[layer][0].numpy().astype(np.float32) for layer in layers}
