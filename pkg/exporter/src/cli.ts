import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { exportDemo } from './demo.js';
import { BundleFormatError, readBundle } from './reader.js';

await yargs(hideBin(process.argv))
  .scriptName('anchorsel-exporter')
  .command(
    'demo',
    'render the demo materials and export them as a feature bundle',
    y =>
      y
        .option('out', { type: 'string', demandOption: true, describe: 'bundle directory' })
        .option('seed', { type: 'number', default: 1 })
        .option('samples-per-class', { type: 'number', default: 2 })
        .option('views', { type: 'number', default: 8 })
        .option('dim', { type: 'number', default: 32 })
        .option('image-size', { type: 'number', default: 64 }),
    args => {
      const report = exportDemo(args.out, {
        seed: args.seed,
        samplesPerClass: args['samples-per-class'],
        viewsPerSample: args.views,
        dim: args.dim,
        imageSize: args['image-size'],
      });
      console.log(
        `exported ${report.numSamples} samples ` +
          `(${report.numClasses} classes, ${report.viewsPerSample} views, ` +
          `dim ${report.dim}) to ${report.dir}`,
      );
      console.log(`bundle identity ${report.identity}`);
    },
  )
  .command(
    'verify <dir>',
    're-check every checksum, shape, and record frame in a bundle',
    y => y.positional('dir', { type: 'string', demandOption: true }),
    args => {
      try {
        const bundle = readBundle(args.dir);
        console.log(
          `ok: ${bundle.samples.length} samples, ` +
            `${bundle.manifest.num_classes} classes, dim ${bundle.manifest.dim}`,
        );
        console.log(`bundle identity ${bundle.identity}`);
      } catch (err) {
        if (err instanceof BundleFormatError) {
          console.error(`invalid bundle: ${err.message}`);
          process.exit(1);
        }
        throw err;
      }
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parseAsync();
