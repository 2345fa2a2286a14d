from setuptools import setup

setup(name="octfluid",
      version="0.1.0",
      description="Retinal OCT fluid segmentation: self-configuring U-Net and residual ASPP networks",
      py_modules=["octfluid", "oct_types", "errors", "loggable", "logger", "lock"],
      packages=["io_data", "planner", "network", "training", "evaluation", "harness"],
      python_requires=">=3.8",
      install_requires=["numpy", "scipy", "torch", "scikit-learn", "pandas"],
      extras_require={"test": ["pytest"]},
      entry_points={"console_scripts": ["octfluid=octfluid:main"]})
