"""Test runner: fast suite by default, Monte-Carlo studies with --all, then lint."""
import argparse
import subprocess
import sys
from typing import Dict, List

SOURCES = ["src/", "tests/", "run_tests.py"]


def pytest_command(include_slow: bool) -> List[str]:
    """pytest invocation; the slow marker is deselected unless include_slow."""
    cmd = [sys.executable, "-m", "pytest", "tests/", "-v", "--tb=short"]
    if not include_slow:
        cmd += ["-m", "not slow"]
    return cmd


def quality_commands() -> Dict[str, List[str]]:
    return {
        "black": ["black", "--check", *SOURCES],
        "isort": ["isort", "--check-only", "--diff", *SOURCES],
        "mypy": ["mypy", "src/"],
        "flake8": ["flake8", "src/"],
    }


def run_unit_tests(include_slow: bool) -> bool:
    """Run the pytest suite."""
    label = "full suite" if include_slow else "fast suite (-m 'not slow')"
    print(f"\n>> Running unit tests: {label}...")

    try:
        result = subprocess.run(
            pytest_command(include_slow), capture_output=True, text=True
        )
    except OSError as e:
        print(f"Error running unit tests: {e}")
        return False

    print(result.stdout)
    if result.stderr:
        print("Error message:")
        print(result.stderr)
    return result.returncode == 0


def run_code_quality_checks() -> bool:
    """Run formatters in check mode plus the type checker and linter."""
    print("\n>> Running code quality checks...")

    all_passed = True
    for check_name, cmd in quality_commands().items():
        try:
            print(f"Running {check_name}...")
            result = subprocess.run(cmd, capture_output=True, text=True)
        except FileNotFoundError:
            print(f"[WARN] {check_name} not installed, skipping check")
            continue

        if result.returncode == 0:
            print(f"[PASS] {check_name} check passed")
        else:
            print(f"[FAIL] {check_name} check failed:")
            print(result.stdout)
            if result.stderr:
                print(result.stderr)
            all_passed = False

    return all_passed


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--all", action="store_true", help="include tests marked slow")
    parser.add_argument("--no-lint", action="store_true", help="skip the code quality checks")
    args = parser.parse_args(argv)

    print("=" * 60)
    print("igd-sync - Automated Test Suite")
    print("=" * 60)

    unit_passed = run_unit_tests(args.all)
    quality_passed = True if args.no_lint else run_code_quality_checks()

    print("\n" + "=" * 60)
    print("Test Summary:")
    print(f"Unit tests: {'[PASS]' if unit_passed else '[FAIL]'}")
    if not args.no_lint:
        print(f"Code quality: {'[PASS]' if quality_passed else '[FAIL]'}")

    if unit_passed and quality_passed:
        print("\nAll checks passed.")
        return 0
    print("\nSome checks failed, see the output above.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
