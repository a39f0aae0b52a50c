import pytest

from config import load_config
from ethseq.ingest.ingest_config import IngestConfig
from ethseq.ingest.records import AccountLabel
from ethseq.model.model_config import ModelConfig
from ethseq.negsample.negsample_config import NegSampleConfig, NegStrategy
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.synthgen.synth_config import SynthConfig
from ethseq.tasks.eval_config import EvalConfig
from ethseq.trainer.finetune_config import FinetuneConfig
from ethseq.trainer.train_config import TrainConfig

SECTIONS = [
    IngestConfig,
    SeqGenConfig,
    NegSampleConfig,
    ModelConfig,
    TrainConfig,
    FinetuneConfig,
    EvalConfig,
    SynthConfig,
]


def test_load_config():
    cfg = load_config()
    assert "LoggingConfig" in cfg
    for cls in SECTIONS:
        assert cls.__name__ in cfg


@pytest.mark.parametrize("cls", SECTIONS)
def test_create_from_yaml_config(cls):
    config = cls.from_dict(load_config().get(cls.__name__))
    assert isinstance(config, cls)


def test_yaml_defaults_match_code_defaults():
    cfg = load_config()
    assert ModelConfig.from_dict(cfg["ModelConfig"]) == ModelConfig()
    assert SeqGenConfig.from_dict(cfg["SeqGenConfig"]) == SeqGenConfig()
    assert NegSampleConfig.from_dict(cfg["NegSampleConfig"]) == NegSampleConfig()


@pytest.mark.parametrize(
    ("mask_ratio", "strategy", "in_out_separation", "negsample_config"),
    [
        (0.8, NegStrategy.ZIPFAN, False, {"pool_size": 5000, "batch_sharing": True}),
        (0.15, NegStrategy.UNIFORM, True, {"pool_size": 20, "batch_sharing": False}),
        (1.0, NegStrategy.FREQ_0_5, False, {"pool_size": 1, "batch_sharing": True}),
    ],
)
class TestCreateFromDict:
    def test_create_from_dict(self, mask_ratio, strategy, in_out_separation, negsample_config):
        cfg = {
            "mask_ratio": mask_ratio,
            "model_config": {"hidden": 16, "heads": 2, "in_out_separation": in_out_separation},
            "negsample_config": {**negsample_config, "strategy": strategy.value},
        }
        train_cfg = TrainConfig.from_dict(cfg)
        assert train_cfg.mask_ratio == mask_ratio
        assert train_cfg.model_config.in_out_separation is in_out_separation
        assert train_cfg.negsample_config.strategy is strategy
        assert train_cfg.negsample_config.pool_size == negsample_config["pool_size"]
        assert train_cfg.negsample_config.batch_sharing is negsample_config["batch_sharing"]

    def test_yaml_round_trip(self, mask_ratio, strategy, in_out_separation, negsample_config):
        train_cfg = TrainConfig(
            mask_ratio=mask_ratio,
            model_config=ModelConfig(in_out_separation=in_out_separation),
            negsample_config=NegSampleConfig(strategy=strategy, **negsample_config),
        )
        assert TrainConfig.from_yaml(train_cfg.to_yaml()) == train_cfg


class TestConfigurable:
    def test_enums_flattened(self):
        assert IngestConfig().to_dict()["excluded_labels"] == ["EXCLUDED"]
        assert NegSampleConfig().to_dict()["strategy"] == "ZIPFAN"

    def test_label_coercion(self):
        config = IngestConfig(excluded_labels=["EXCLUDED", "PAIRED_A"])
        assert config.excluded_labels == [AccountLabel.EXCLUDED, AccountLabel.PAIRED_A]

    def test_hash_tracks_settings(self):
        assert SeqGenConfig().config_hash() == SeqGenConfig().config_hash()
        assert SeqGenConfig().config_hash() != SeqGenConfig(dedup=False).config_hash()

    def test_nested_change_changes_hash(self):
        a = TrainConfig(model_config=ModelConfig(layers=2))
        b = TrainConfig(model_config=ModelConfig(layers=3))
        assert a != b
        assert a.config_hash() != b.config_hash()

    def test_empty_dict_gives_defaults(self):
        assert FinetuneConfig.from_dict(None) == FinetuneConfig()

    @pytest.mark.parametrize(
        ("cls", "kwargs"),
        [
            (IngestConfig, {"shard_rows": -1}),
            (ModelConfig, {"hidden": 10, "heads": 3}),
            (ModelConfig, {"dropout": 1.0}),
            (SeqGenConfig, {"max_seq_len": 1}),
            (FinetuneConfig, {"test_fraction": 1.0}),
            (NegSampleConfig, {"strategy": "GAUSSIAN"}),
        ],
    )
    def test_invalid(self, cls, kwargs):
        with pytest.raises(ValueError):
            cls(**kwargs)
