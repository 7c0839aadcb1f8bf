"""Regenerates the tiny reference encoder used by the unit tests.

Builds a randomly initialized 2-block BERT with the reference Python
implementation, saves it in checkpoint layout (config.json, vocab.txt,
model.safetensors) and records tokenizations, final hidden states and
final-layer attention for a few probe texts in expected.json.
"""
import json
import pathlib

import torch
from transformers import BertConfig, BertModel, BertTokenizer

out = pathlib.Path(__file__).resolve().parent / "tiny_bert"
out.mkdir(exist_ok=True)

words = ["if", "you", "have", "bank", "account", "or", "can", "open", "new", "one", "then", "we", "need",
         "free", "prize", "claim", "now", "un", "##aff", "##able", "##s", "hello", "world", "cafe"]
chars = sorted(set("abcdefghijklmnopqrstuvwxyz0123456789!?.,'\"-"))
vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + words + chars + ["##" + c for c in chars if c.isalnum()]
(out / "vocab.txt").write_text("\n".join(vocab) + "\n")

torch.manual_seed(7)
config = BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=2, num_attention_heads=4,
                    intermediate_size=32, max_position_embeddings=64, type_vocab_size=2,
                    attn_implementation="eager")
model = BertModel(config, add_pooling_layer=False).eval()
with torch.no_grad():
    for p in model.parameters():
        p.normal_(0.0, 0.2)
model.save_pretrained(out, safe_serialization=True)

tokenizer = BertTokenizer(str(out / "vocab.txt"), do_lower_case=True)
probes = ["if you have bank account or you can open new one then we need you !",
          "Unaffable CAFÉ, hello world?", "FREE prize!!! claim now", "zzz"]
records = []
for text in probes:
    enc = tokenizer(text, return_tensors="pt")
    with torch.no_grad():
        result = model(**enc, output_attentions=True)
    records.append({
        "text": text,
        "tokens": tokenizer.convert_ids_to_tokens(enc["input_ids"][0]),
        "ids": enc["input_ids"][0].tolist(),
        "hidden": result.last_hidden_state[0].tolist(),
        "cls_attention": result.attentions[-1][0, :, 0, :].tolist(),
    })
(out / "expected.json").write_text(json.dumps(records))
