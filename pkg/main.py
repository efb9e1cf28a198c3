#!/usr/bin/env python3
"""
bessopt - Point d'entrée principal
==================================

Planification et commande prédictive d'un stockage par batterie raccordé
au réseau : bannière, logging puis délégation à l'interface en ligne de
commande.
"""

import sys
from pathlib import Path

from loguru import logger

# Ajout du répertoire racine au path Python
sys.path.insert(0, str(Path(__file__).parent))

from core.config import config
from core.logs import setup_logging
from scripts.cli import main as cli_main


def print_banner():
    """Affichage de la bannière de démarrage (sur stderr, stdout reste au JSON)"""

    banner = """
    ██████╗ ███████╗███████╗███████╗ ██████╗ ██████╗ ████████╗
    ██╔══██╗██╔════╝██╔════╝██╔════╝██╔═══██╗██╔══██╗╚══██╔══╝
    ██████╔╝█████╗  ███████╗███████╗██║   ██║██████╔╝   ██║
    ██╔══██╗██╔══╝  ╚════██║╚════██║██║   ██║██╔═══╝    ██║
    ██████╔╝███████╗███████║███████║╚██████╔╝██║        ██║
    ╚═════╝ ╚══════╝╚══════╝╚══════╝ ╚═════╝ ╚═╝        ╚═╝
    """

    err = sys.stderr
    print("\033[96m" + banner + "\033[0m", file=err)
    print("\033[93m" + "🔋 Planification et MPC de stockage par batterie" + "\033[0m", file=err)
    print("\033[92m" + f"Version {config.version}" + "\033[0m", file=err)
    print("\033[94m" + "=" * 64 + "\033[0m", file=err)


def print_system_info():
    """Affichage de la configuration active"""

    logger.debug("Configuration:")
    logger.debug(f"  📄  Installation: {config.system_config}")
    logger.debug(f"  📁  Sorties: {config.output_dir}")
    logger.debug(f"  👥  Workers: {config.workers}")
    logger.debug(f"  🎲  Graine: {config.seed}")


def main():
    """Fonction principale"""

    argv = sys.argv[1:]
    if "--json" not in argv:
        print_banner()
    setup_logging(config.log_level, config.log_file)
    print_system_info()

    try:
        code = cli_main(argv)
    except KeyboardInterrupt:
        logger.info("🛑 Arrêt demandé par l'utilisateur")
        code = 1
    except Exception as e:
        logger.error(f"❌ Erreur inattendue: {e}")
        code = 1

    sys.exit(code)


if __name__ == "__main__":
    main()
