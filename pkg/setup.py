from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="reni-field",
    version="0.1.0",
    author="RENI field contributors",
    description="Rotation-equivariant neural illumination fields: a generative prior over HDR environment maps",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Image Processing",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "reni=reni.cli:main",
        ],
    },
    include_package_data=True,
    data_files=[
        ("config", [
            "config/logging_config.yaml",
            "config/manifest_schema.json",
            "config/train_config.json",
            "config/desk_train_config.toml",
            "config/desk_fit_config.toml",
        ]),
    ],
)
