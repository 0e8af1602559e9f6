import subprocess
import sys
import os
import logging

# Configure logging to show INFO level messages
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)

logger = logging.getLogger(__name__)


def main():
    """Run the RAST dashboard."""
    try:
        try:
            import streamlit  # noqa: F401
        except ImportError:
            logger.error("Streamlit is not installed. Run `pip install -r requirements.txt` first.")
            return 1

        # Get the current directory
        current_dir = os.path.dirname(os.path.abspath(__file__))

        # Add package to Python path
        sys.path.append(current_dir)

        # Run the Streamlit application
        streamlit_file = os.path.join(current_dir, "src", "app.py")
        logger.info(f"Starting Streamlit dashboard: {streamlit_file}")
        env = dict(os.environ, PYTHONPATH=os.pathsep.join(filter(None, [current_dir, os.environ.get("PYTHONPATH")])))
        subprocess.run([sys.executable, "-m", "streamlit", "run", streamlit_file], env=env)

    except Exception as e:
        logger.error(f"Error running the dashboard: {e}")
        return 1

    return 0

if __name__ == "__main__":
    sys.exit(main())
