#include "dekompost/cli.h"

int main(int argc, char** argv) { return dekompost::cli::run(argc, argv); }
