"""Setup configuration for the ldrdyn package."""

from setuptools import setup, find_packages

setup(
    name="ldr-dyn",
    version="0.1.0",
    description="Local diabatic representation dynamics through a conical intersection",
    author="Mohamed Amine EL ARJOUNI",
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"ldrdyn": ["profiles/*.json"]},
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.3",
        "pyarrow>=6.0.0",
    ],
    extras_require={
        "dev": ["pytest>=7.0", "black", "flake8", "mypy", "pytest-cov"],
    },
    entry_points={
        "console_scripts": [
            "ldr-dyn=ldrdyn.cli:main",
        ],
    },
)
