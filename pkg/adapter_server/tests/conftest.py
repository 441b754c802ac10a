import pytest
import torch
from fastapi.testclient import TestClient
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

from adapter_server.app import create_app
from adapter_server.config import ModelConfig
from adapter_server.engine import InferenceEngine

# enough vocabulary that prompts are not wall-to-wall [UNK]; everything else
# falls back to [UNK], which still tokenizes with correct offsets
WORDS = (
    "based on the reasoning paths please answer given question keep as simple "
    "possible and return all answers a list high priority additional you are "
    "numbered select that help reply with numbers of relevant for example none "
    "if no path is what which who where when capital france paris country city "
    "located team sports education institution university northern colorado "
    "bears football greeley location containedby united states america masonic "
    "temple wrote river currency language planet film ocean олимп olympics "
    "element moon walk first person 0 1 2 3 4 5 6 7 8 9 10 : , . ? ( ) →"
).split()


def build_tiny_model(target_dir: str) -> None:
    vocab = {"[UNK]": 0, "[PAD]": 1, "[EOS]": 2}
    for w in WORDS:
        vocab.setdefault(w, len(vocab))
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", pad_token="[PAD]", eos_token="[EOS]"
    )
    torch.manual_seed(1234)  # deterministic weights for reproducible tests
    config = GPT2Config(
        vocab_size=len(vocab), n_positions=512, n_embd=32, n_layer=6, n_head=4,
        bos_token_id=vocab["[EOS]"], eos_token_id=vocab["[EOS]"],
    )
    model = GPT2LMHeadModel(config)
    model.save_pretrained(target_dir)
    fast.save_pretrained(target_dir)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    target = tmp_path_factory.mktemp("tiny-model")
    build_tiny_model(str(target))
    return str(target)


@pytest.fixture(scope="session")
def engine(tiny_model_dir):
    return InferenceEngine(ModelConfig(model_id=tiny_model_dir, max_context_tokens=400))


@pytest.fixture(scope="session")
def client(engine):
    app = create_app(engine)
    return TestClient(app, raise_server_exceptions=False)
