#include "hsmgnn/cli.hpp"

int main(int argc, char** argv) { return hsmgnn::run_cli(argc, argv); }
