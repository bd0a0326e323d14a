#!/usr/bin/env python3
"""
Test runner for hvacbench: runs each test group in its own pytest process.

    python tests/run_tests.py           # fast groups
    python tests/run_tests.py --slow    # plus the full-day acceptance runs
"""

import os
import subprocess
import sys
from pathlib import Path

GROUPS = [
    ("🌡️ Thermal model and cost", "test_thermal.py"),
    ("🌤️ Scenarios and tariffs", "test_scenarios.py"),
    ("🧮 Networks and Adam", "test_nn.py"),
    ("📐 Trajectory optimisation", "test_optim.py"),
    ("🎛️ Controllers", "test_controllers.py"),
    ("🧠 Training", "test_training.py"),
    ("🏁 Harness and CLI", "test_harness.py"),
]


def run_tests(slow: bool = False) -> bool:
    """Run all groups; True when every group passed"""
    test_dir = Path(__file__).parent
    env = dict(os.environ)
    if slow:
        env["HVACBENCH_RUN_SLOW"] = "1"

    failed = []
    for title, filename in GROUPS:
        print(f"\n{title}...")
        try:
            result = subprocess.run([
                sys.executable, "-m", "pytest",
                str(test_dir / filename),
                "-v", "--tb=short"
            ], cwd=test_dir.parent, env=env)
        except OSError as e:
            print(f"❌ Failed to run {filename}: {e}")
            return False
        if result.returncode != 0:
            failed.append(filename)

    if failed:
        print(f"\n❌ Some tests failed: {', '.join(failed)}")
        return False
    print("\n✅ All tests passed!")
    return True


if __name__ == "__main__":
    success = run_tests(slow="--slow" in sys.argv[1:])
    sys.exit(0 if success else 1)
