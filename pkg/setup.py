"""
Generic setup for this python package
"""

from setuptools import find_packages, setup

setup(
    name="deptharb-cli",
    version="0.1.00",
    packages=find_packages(),
    package_data={"deptharb": ["scenes/*.json"]},
    install_requires=["numpy>=1.24"],
    entry_points={
        "console_scripts": [
            "deptharb=cli.deptharb_cli:main",
            "deptharb-run=cli.guidance_runner:main",
            "deptharb-grad-check=cli.grad_checker:main",
            "deptharb-sweep=cli.param_sweeper:main",
            "deptharb-eval=cli.dump_evaluator:main",
            "deptharb-ablate=cli.ablation_runner:main",
        ],
    },
)
