# tests/test_config_logger.py
import pytest

from core.exceptions import ConfigurationError
from utils.config import Config, SETTINGS_SCHEMA, default_settings, load_settings
from utils.logger import SimpleLogger, logger


@pytest.fixture
def clean_env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for env_name, _, _ in SETTINGS_SCHEMA.values():
        monkeypatch.delenv(env_name, raising=False)
    return tmp_path


class TestSettings:
    def test_defaults(self, clean_env):
        settings = load_settings()
        assert settings == default_settings()
        assert (settings['k'], settings['f'], settings['w']) == (Config.DEFAULT_K, Config.DEFAULT_F, Config.DEFAULT_W)

    def test_default_toml_is_picked_up(self, clean_env):
        (clean_env / Config.DEFAULT_TOML).write_text("[matching]\nk = 50\nf = 10\n\n[seqslam]\nvmax = 1.5\n")
        settings = load_settings()
        assert (settings['k'], settings['f'], settings['vmax']) == (50, 10, 1.5)
        assert settings['w'] == Config.DEFAULT_W

    def test_env_file_then_environment(self, clean_env, monkeypatch):
        (clean_env / "run.toml").write_text("[matching]\nk = 50\nw = 2\n")
        (clean_env / ".env").write_text("# local overrides\nVPR_K=70\nVPR_ALLOWANCE='3'\n")
        monkeypatch.setenv("VPR_K", "90")
        settings = load_settings("run.toml")
        assert settings['k'] == 90
        assert settings['w'] == 2
        assert settings['allowance'] == 3

    def test_env_file_can_be_disabled(self, clean_env):
        (clean_env / ".env").write_text("VPR_K=70\n")
        assert load_settings(env_path=None)['k'] == Config.DEFAULT_K

    def test_bad_value(self, clean_env, monkeypatch):
        monkeypatch.setenv("VPR_F", "many")
        with pytest.raises(ConfigurationError, match="'f'"):
            load_settings()

    def test_missing_explicit_file(self, clean_env):
        with pytest.raises(ConfigurationError):
            load_settings("absent.toml")

    def test_unparsable_toml(self, clean_env):
        (clean_env / "broken.toml").write_text("[matching\nk = ")
        with pytest.raises(ConfigurationError):
            load_settings("broken.toml")

    def test_unknown_keys_are_ignored_with_a_warning(self, clean_env):
        (clean_env / "extra.toml").write_text("[matching]\nkk = 3\n\n[gui]\ntheme = 'dark'\n")
        settings = load_settings("extra.toml")
        assert settings == default_settings()
        warnings = [e['message'] for e in logger.get_recent_logs(5) if e['level'] == 'WARNING']
        assert any("kk" in m for m in warnings)
        assert any("[gui]" in m for m in warnings)


class TestLogger:
    def test_ring_buffer(self):
        log = SimpleLogger(max_logs=3)
        log.enabled = False
        for i in range(5):
            log.info(f"message {i}", "test")
        assert [e['message'] for e in log.get_recent_logs(10)] == ["message 2", "message 3", "message 4"]
        assert log.get_recent_logs(1)[0]['category'] == "TEST"

    def test_level_filter(self):
        log = SimpleLogger(level="WARNING")
        log.enabled = False
        log.debug("hidden")
        log.info("hidden")
        log.error("shown")
        assert [e['level'] for e in log.get_recent_logs()] == ["ERROR"]
        log.set_level("debug")
        log.debug("now visible")
        assert log.get_recent_logs(1)[0]['message'] == "now visible"

    def test_console_output_goes_to_stderr(self, capsys):
        log = SimpleLogger()
        log.warning("disk almost full", "io")
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "WARNING IO: disk almost full" in captured.err

    def test_disabled_logger_still_records(self, capsys):
        log = SimpleLogger()
        log.enabled = False
        log.info("quiet")
        assert capsys.readouterr().err == ""
        assert log.get_recent_logs(1)[0]['message'] == "quiet"
