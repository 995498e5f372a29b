import os


def test_config_file_switches_diameter_to_bounds(spawn, ran_tools, config_dir):
    config = config_dir / "small_diameter.conf"
    with spawn(
        f"{ran_tools} diameter --t 50 --seed 1 --config {config.resolve()}"
    ) as child:
        child.expect('"method": "double-sweep"')
        assert child.exitstatus() == 0


def test_memory_limit_from_environment(spawn, ran_tools):
    with spawn(
        f"{ran_tools} generate --t 1000000 --seed 1",
        env={**os.environ, "RAN_MEM_LIMIT": "1MiB"},
    ) as child:
        child.expect("over the memory budget")
        assert child.exitstatus() == 1


def test_broken_config_file_is_a_usage_error(spawn, ran_tools, tmp_path):
    config = tmp_path / "broken.conf"
    config.write_text("[ran]\nworkers = 0\n")
    with spawn(f"{ran_tools} constants --config {config}") as child:
        child.expect("Invalid \\[ran\\] config")
        assert child.exitstatus() == 2
