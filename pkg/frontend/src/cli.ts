/** File-in/file-out figure rendering:
 *
 *   node dist/cli.js cdf-overlay --full a.csv --reduced b.csv --out fig.svg \
 *       [--xlabel H] [--title "..."]
 *   node dist/cli.js slope --input ensemble_summary.csv --metric mean_sup_beta_sq \
 *       --out rates.svg [--title "..."]
 */
import { parseArgs } from "node:util";

import { MissingInput, SchemaMismatch } from "./csv.js";
import { render } from "./figures.js";

function fail(msg: string): never {
  console.error(msg);
  process.exit(2);
}

export function main(argv: string[]): number {
  const kind = argv[0];
  const rest = argv.slice(1);
  try {
    if (kind === "cdf-overlay") {
      const { values } = parseArgs({
        args: rest,
        options: {
          full: { type: "string" },
          reduced: { type: "string" },
          out: { type: "string" },
          xlabel: { type: "string", default: "x" },
          title: { type: "string", default: "empirical CDFs" },
        },
      });
      if (!values.full || !values.reduced || !values.out) {
        fail("cdf-overlay needs --full, --reduced and --out");
      }
      render({
        kind: "cdf_overlay",
        full: values.full,
        reduced: values.reduced,
        xLabel: values.xlabel!,
        title: values.title!,
        output: values.out,
      });
      return 0;
    }
    if (kind === "slope") {
      const { values } = parseArgs({
        args: rest,
        options: {
          input: { type: "string" },
          metric: { type: "string" },
          out: { type: "string" },
          title: { type: "string", default: "rate fit" },
        },
      });
      if (!values.input || !values.metric || !values.out) {
        fail("slope needs --input, --metric and --out");
      }
      render({
        kind: "slope",
        input: values.input,
        metric: values.metric,
        title: values.title!,
        output: values.out,
      });
      return 0;
    }
    fail(`unknown figure kind '${kind}' (use cdf-overlay or slope)`);
  } catch (e) {
    if (e instanceof MissingInput || e instanceof SchemaMismatch) {
      console.error(`${e.constructor.name}: ${e.message}`);
      return 3;
    }
    throw e;
  }
}

process.exit(main(process.argv.slice(2)));
