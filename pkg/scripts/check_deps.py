#!/usr/bin/env python3
"""
Dependency verification script for interimcore.

Checks that every required package imports, reports installed versions, and
solves a one-variable LP with each HiGHS method the config schema offers.
"""
import sys
from importlib.metadata import PackageNotFoundError, version

# Distribution name -> import name
REQUIRED_PACKAGES: dict[str, str] = {
    "numpy": "numpy",
    "scipy": "scipy",
    "PyYAML": "yaml",
    "typer-slim": "typer",
    "tqdm": "tqdm",
}

DEV_PACKAGES: dict[str, str] = {
    "pytest": "pytest",
    "pytest-timeout": "pytest_timeout",
    "hypothesis": "hypothesis",
    "ruff": "ruff",
}

LP_METHODS = ("highs", "highs-ds", "highs-ipm")


def installed_version(distribution: str) -> str:
    try:
        return version(distribution)
    except PackageNotFoundError:
        return "?"


def check_imports(packages: dict[str, str]) -> tuple[list[str], list[str]]:
    """Split packages into importable and missing."""
    found, missing = [], []
    for distribution, module in packages.items():
        try:
            __import__(module)
            found.append(distribution)
        except ImportError:
            missing.append(distribution)
    return found, missing


def check_lp_methods() -> list[str]:
    """Methods that fail to solve max x s.t. x <= 1."""
    from scipy.optimize import linprog

    broken = []
    for method in LP_METHODS:
        result = linprog(c=[-1.0], A_ub=[[1.0]], b_ub=[1.0], bounds=[(0, None)], method=method)
        if result.status != 0 or abs(result.x[0] - 1.0) > 1e-9:
            broken.append(method)
    return broken


def _report(title: str, packages: dict[str, str], missing_label: str) -> list[str]:
    print(f"{title}:")
    print("-" * 60)
    found, missing = check_imports(packages)
    for distribution in found:
        print(f"  ✓ {distribution} {installed_version(distribution)}")
    for distribution in missing:
        print(f"  ✗ {distribution} - {missing_label}")
    print()
    return missing


def main() -> int:
    print("=" * 60)
    print("interimcore Dependency Check")
    print("=" * 60)
    print()

    missing = _report("Required Packages", REQUIRED_PACKAGES, "MISSING")
    _report("Development Packages", DEV_PACKAGES, "not installed (dev only)")

    if missing:
        print(f"{len(missing)} required package(s) missing. Install with:")
        print("  pip install -r requirements.txt")
        return 1

    broken = check_lp_methods()
    if broken:
        print(f"scipy.optimize.linprog cannot solve with: {', '.join(broken)}")
        print("Set solver_options.lp_method to a working method or upgrade scipy.")
        return 1

    print(f"All required dependencies installed; LP methods OK: {', '.join(LP_METHODS)}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
